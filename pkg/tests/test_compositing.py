from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pytest

from agbmap.compositing import (
    CLOUDY_CLASSES,
    SceneSeries,
    cloud_mask,
    median_composite,
    temporal_mean,
)
from agbmap.errors import BadClassCode, EmptySeries, EmptyWindow
from agbmap.raster import ChannelId, Grid, Raster
from conftest import make_raster

SCL = ChannelId("SCL", "SCL")


def _grid(n=4):
    return Grid(0.0, 0.0, 30.0, 30.0, n, n, "utm")


def _scl(values, mask=None, n=4):
    return make_raster(_grid(n), np.asarray(values, dtype=float), mask, channel=SCL)


class TestCloudMask:
    def test_vegetation_all_usable(self):
        assert cloud_mask(_scl(np.full((4, 4), 4))).all()

    def test_high_cloud_all_unusable(self):
        assert not cloud_mask(_scl(np.full((4, 4), 9))).any()

    def test_quadrants(self):
        codes = np.zeros((4, 4))
        codes[:2, :2] = 4   # vegetation -> usable
        codes[:2, 2:] = 3   # cloud shadow -> unusable
        codes[2:, :2] = 8   # medium cloud -> unusable
        codes[2:, 2:] = 5   # bare soil -> usable
        m = cloud_mask(_scl(codes))
        assert m[:2, :2].all() and m[2:, 2:].all()
        assert not m[:2, 2:].any() and not m[2:, :2].any()

    def test_invalid_scl_pixel_is_unusable(self):
        mask = np.ones((4, 4), dtype=bool)
        mask[1, 1] = False
        m = cloud_mask(_scl(np.full((4, 4), 4.0), mask))
        assert not m[1, 1]
        assert m.sum() == 15

    def test_bad_class_code(self):
        with pytest.raises(BadClassCode):
            cloud_mask(_scl(np.full((4, 4), 12)))
        with pytest.raises(BadClassCode):
            cloud_mask(_scl(np.full((4, 4), 4.5)))


def _series(value_stack, scl_stack=None, start=date(2021, 6, 5), step=10, n=4):
    scenes = [make_raster(_grid(n), v) for v in value_stack]
    stamps = [start + timedelta(days=step * i) for i in range(len(scenes))]
    scl = [_scl(s, n=n) for s in scl_stack] if scl_stack is not None else None
    return SceneSeries(scenes, stamps, scl)


class TestMedianComposite:
    def test_single_scene_identity(self):
        vals = np.arange(16.0).reshape(4, 4)
        out = median_composite(_series([vals], [[np.full((4, 4), 4)][0]]))
        assert np.array_equal(out.data[:, :, 0], vals)

    def test_odd_count_median(self):
        out = median_composite(_series([np.full((4, 4), v) for v in (10.0, 90.0, 20.0)]))
        assert np.all(out.data[:, :, 0] == 20.0)

    def test_even_count_median_is_middle_mean(self):
        out = median_composite(_series([np.full((4, 4), v) for v in (1.0, 9.0)]))
        assert np.all(out.data[:, :, 0] == 5.0)

    def test_all_cloudy_pixel_invalid(self):
        vals = [np.ones((4, 4)), np.ones((4, 4))]
        scl = [np.full((4, 4), 4.0), np.full((4, 4), 4.0)]
        for s in scl:
            s[0, 0] = 9.0
        out = median_composite(_series(vals, scl))
        assert not out.valid_mask[0, 0]
        assert out.valid_mask[1:, :].all()

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            t = int(rng.integers(1, 8))
            vals = [rng.normal(size=(4, 4)) for _ in range(t)]
            scl = [np.where(rng.random((4, 4)) < 0.4, 9.0, 4.0) for _ in range(t)]
            out = median_composite(_series(vals, scl))
            for r in range(4):
                for c in range(4):
                    usable = sorted(
                        vals[i][r, c] for i in range(t) if scl[i][r, c] == 4.0
                    )
                    if not usable:
                        assert not out.valid_mask[r, c]
                        continue
                    k = len(usable)
                    want = usable[k // 2] if k % 2 else 0.5 * (usable[k // 2 - 1] + usable[k // 2])
                    assert out.data[r, c, 0] == want

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        vals = [rng.normal(size=(4, 4)) for _ in range(5)]
        scl = [np.where(rng.random((4, 4)) < 0.3, 8.0, 4.0) for _ in range(5)]
        a = median_composite(_series(vals, scl))
        order = [3, 0, 4, 1, 2]
        b = median_composite(_series([vals[i] for i in order], [scl[i] for i in order]))
        assert np.array_equal(a.valid_mask, b.valid_mask)
        assert np.array_equal(a.data[a.valid_mask], b.data[b.valid_mask])

    def test_empty_series(self):
        with pytest.raises((EmptySeries, ValueError)):
            median_composite(SceneSeries([], [], None))


class TestTemporalMean:
    def test_single_scene_identity(self):
        vals = np.arange(16.0).reshape(4, 4)
        out = temporal_mean(_series([vals]), (date(2021, 6, 1), date(2021, 8, 31)))
        assert np.array_equal(out.data[:, :, 0], vals)

    def test_constant_series(self):
        out = temporal_mean(
            _series([np.full((4, 4), 7.0)] * 3), (date(2021, 6, 1), date(2021, 8, 31))
        )
        assert np.all(out.data[:, :, 0] == 7.0)

    def test_out_of_window_scene_excluded(self):
        # scenes on Jun 5, Jun 15 and Sep 13; window keeps the first two
        series = _series(
            [np.full((4, 4), 2.0), np.full((4, 4), 4.0), np.full((4, 4), 9.0)],
            step=50,
        )
        out = temporal_mean(series, (date(2021, 6, 1), date(2021, 8, 31)))
        assert np.all(out.data[:, :, 0] == 3.0)

    def test_empty_window(self):
        with pytest.raises(EmptyWindow):
            temporal_mean(_series([np.ones((4, 4))]), (date(2020, 1, 1), date(2020, 2, 1)))

    def test_output_within_observation_bounds(self):
        rng = np.random.default_rng(12)
        vals = [rng.normal(size=(4, 4)) for _ in range(4)]
        out = temporal_mean(_series(vals), (date(2021, 6, 1), date(2021, 8, 31)))
        lo = np.min(np.stack(vals), axis=0)
        hi = np.max(np.stack(vals), axis=0)
        assert np.all(out.data[:, :, 0] >= lo - 1e-12)
        assert np.all(out.data[:, :, 0] <= hi + 1e-12)


def test_cloudy_classes_are_the_conservative_set():
    assert CLOUDY_CLASSES == {0, 1, 3, 8, 9, 10, 11}
