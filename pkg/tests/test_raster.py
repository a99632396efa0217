from __future__ import annotations

import numpy as np
import pytest

from agbmap.errors import CrsMismatch, EmptySource
from agbmap.raster import (
    ChannelId,
    Grid,
    Raster,
    bilinear_resample,
    extract_window,
    pixel_to_world,
    tile,
    world_to_pixel,
)
from conftest import make_raster


class TestWorldToPixel:
    def test_upper_left_center(self, grid10):
        assert world_to_pixel(grid10, 15.0, -15.0) == (0.0, 0.0)

    def test_one_pixel_east(self, grid10):
        assert world_to_pixel(grid10, 45.0, -15.0) == (1.0, 0.0)

    def test_corner_between_pixels(self, grid10):
        # hand affine inverse: (30-0)/30 - 0.5 = 0.5 in both axes
        assert world_to_pixel(grid10, 30.0, -30.0) == (0.5, 0.5)

    def test_round_trip_identity(self, grid10):
        rng = np.random.default_rng(7)
        cols = rng.uniform(-0.5, grid10.width - 0.5, size=200)
        rows = rng.uniform(-0.5, grid10.height - 0.5, size=200)
        x, y = pixel_to_world(grid10, cols, rows)
        c2, r2 = world_to_pixel(grid10, x, y)
        assert np.max(np.abs(c2 - cols)) < 1e-9
        assert np.max(np.abs(r2 - rows)) < 1e-9

    def test_y_up_grid(self):
        g = Grid(0.0, 0.0, 10.0, 10.0, 4, 4, "utm", y_down=False)
        col, row = world_to_pixel(g, 5.0, 5.0)
        assert (col, row) == (0.0, 0.0)


def _oracle_bilinear(src: Raster, target: Grid) -> Raster:
    """Independent per-pixel 4-neighbor blend with weight renormalization."""
    out = np.full((target.height, target.width, src.n_channels), np.nan)
    ok = np.zeros((target.height, target.width), dtype=bool)
    g = src.grid
    for r in range(target.height):
        for c in range(target.width):
            x = target.origin_x + (c + 0.5) * target.pixel_size_x
            y = target.origin_y - (r + 0.5) * target.pixel_size_y
            fc = (x - g.origin_x) / g.pixel_size_x - 0.5
            fr = (g.origin_y - y) / g.pixel_size_y - 0.5
            c0, r0 = int(np.floor(fc)), int(np.floor(fr))
            dc, dr = fc - c0, fr - r0
            pairs = [
                (r0, c0, (1 - dr) * (1 - dc)),
                (r0, c0 + 1, (1 - dr) * dc),
                (r0 + 1, c0, dr * (1 - dc)),
                (r0 + 1, c0 + 1, dr * dc),
            ]
            wsum = 0.0
            vsum = np.zeros(src.n_channels)
            contributing = []
            for rr, cc, w in pairs:
                if 0 <= rr < g.height and 0 <= cc < g.width and src.valid_mask[rr, cc]:
                    wsum += w
                    vsum = vsum + w * src.data[rr, cc, :]
                    if w > 0:
                        contributing.append(src.data[rr, cc, :])
            if wsum >= 0.5:
                val = vsum / wsum
                out[r, c, :] = val
                ok[r, c] = True
                if contributing:
                    stack = np.stack(contributing)
                    assert np.all(val >= stack.min(axis=0) - 1e-12)
                    assert np.all(val <= stack.max(axis=0) + 1e-12)
    return Raster(target, src.channels, out, ok)


class TestBilinearResample:
    def test_identity_on_same_grid_exact(self, grid10):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(10, 10))
        mask = rng.random((10, 10)) > 0.2
        src = make_raster(grid10, vals, mask)
        out = bilinear_resample(src, grid10)
        assert np.array_equal(out.valid_mask, src.valid_mask)
        assert np.array_equal(out.data[out.valid_mask], src.data[src.valid_mask])

    def test_center_of_four_pixels_is_mean(self):
        g = Grid(0.0, 0.0, 10.0, 10.0, 2, 2, "utm")
        src = make_raster(g, np.array([[1.0, 2.0], [3.0, 4.0]]))
        # single-pixel target centered on the 4 source centers
        t = Grid(5.0, -5.0, 10.0, 10.0, 1, 1, "utm")
        out = bilinear_resample(src, t)
        assert out.valid_mask[0, 0]
        assert out.data[0, 0, 0] == pytest.approx(2.5, abs=1e-12)

    def test_matches_loop_oracle_on_random_pairs(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            g = Grid(1000.0, 2000.0, 8.0, 8.0, 8, 8, "utm")
            vals = rng.normal(size=(8, 8))
            mask = rng.random((8, 8)) > 0.25
            if not mask.any():
                mask[0, 0] = True
            src = make_raster(g, vals, mask)
            t = Grid(
                1000.0 + rng.uniform(-20, 20),
                2000.0 + rng.uniform(-20, 20),
                rng.uniform(4.0, 14.0),
                rng.uniform(4.0, 14.0),
                rng.integers(3, 10),
                rng.integers(3, 10),
                "utm",
            )
            got = bilinear_resample(src, t)
            want = _oracle_bilinear(src, t)
            assert np.array_equal(got.valid_mask, want.valid_mask), f"trial {trial}"
            both = got.valid_mask
            assert np.nanmax(np.abs(got.data[both] - want.data[both]), initial=0.0) < 1e-9

    def test_aligned_offset_copy(self, grid10):
        rng = np.random.default_rng(3)
        src = make_raster(grid10, rng.normal(size=(10, 10)))
        t = Grid(60.0, -30.0, 30.0, 30.0, 5, 5, "utm")  # 2 px east, 1 px south
        out = bilinear_resample(src, t)
        assert np.array_equal(out.data[:, :, 0], src.data[1:6, 2:7, 0])
        assert out.valid_mask.all()

    def test_crs_mismatch(self, grid10):
        src = make_raster(grid10, np.ones((10, 10)))
        bad = Grid(0.0, 0.0, 30.0, 30.0, 10, 10, "other")
        with pytest.raises(CrsMismatch):
            bilinear_resample(src, bad)

    def test_empty_source(self, grid10):
        src = make_raster(grid10, np.ones((10, 10)), np.zeros((10, 10), dtype=bool))
        with pytest.raises(EmptySource):
            bilinear_resample(src, grid10)


def _grid(width, height, pixel=30.0):
    return Grid(0.0, 0.0, pixel, pixel, width, height, "utm")


class TestTiling:
    def test_single_tile(self):
        r = make_raster(_grid(512, 512), np.zeros((512, 512)))
        views = tile(r, 512, 512)
        assert len(views) == 1
        assert not views[0].padded

    def test_two_tiles(self):
        r = make_raster(_grid(1024, 512), np.zeros((512, 1024)))
        views = tile(r, 512, 512)
        assert len(views) == 2
        assert not any(v.padded for v in views)

    def test_600_gives_four_tiles_three_padded(self):
        # window origins enumerate to (0,0), (0,512), (512,0), (512,512)
        r = make_raster(_grid(600, 600), np.zeros((600, 600)))
        views = tile(r, 512, 512)
        assert len(views) == 4
        assert sum(v.padded for v in views) == 3

    def test_every_pixel_covered_and_stitch_reconstructs(self):
        rng = np.random.default_rng(11)
        vals = rng.normal(size=(70, 90))
        r = make_raster(_grid(90, 70), vals)
        views = tile(r, 32, 24)
        covered = np.zeros((70, 90), dtype=int)
        stitched = np.full((70, 90), np.nan)
        for v in views:
            w = v.window
            in_h = min(w.height, 70 - w.row0)
            in_w = min(w.width, 90 - w.col0)
            covered[w.row0:w.row0 + in_h, w.col0:w.col0 + in_w] += 1
            stitched[w.row0:w.row0 + in_h, w.col0:w.col0 + in_w] = \
                v.raster.data[:in_h, :in_w, 0]
        assert (covered >= 1).all()
        assert np.array_equal(stitched, vals)

    def test_reflection_padding_values(self):
        vals = np.arange(9.0).reshape(3, 3)
        r = make_raster(_grid(3, 3), vals)
        view = extract_window(r, tile(r, 4, 4)[0].window)
        # symmetric reflection duplicates the last row/col mirror-wise
        assert view.data[3, 0, 0] == vals[2, 0]
        assert view.data[0, 3, 0] == vals[0, 2]
        assert view.data[3, 3, 0] == vals[2, 2]

    def test_deterministic_ordering(self):
        r = make_raster(_grid(100, 100), np.zeros((100, 100)))
        a = [v.window for v in tile(r, 32, 32)]
        b = [v.window for v in tile(r, 32, 32)]
        assert a == b
        origins = [(w.row0, w.col0) for w in a]
        assert origins == sorted(origins)


class TestRasterInvariants:
    def test_sentinel_never_at_valid_pixels(self, grid10):
        vals = np.ones((10, 10))
        mask = np.ones((10, 10), dtype=bool)
        mask[0, 0] = False
        r = make_raster(grid10, vals, mask)
        assert np.isnan(r.data[0, 0, 0])
        assert np.isfinite(r.data[r.valid_mask]).all()

    def test_nonfinite_at_valid_pixel_rejected(self, grid10):
        vals = np.ones((10, 10))
        vals[2, 2] = np.inf
        with pytest.raises(ValueError):
            make_raster(grid10, vals, np.ones((10, 10), dtype=bool))

    def test_duplicate_channels_rejected(self, grid10):
        ch = ChannelId("S2", "B04")
        with pytest.raises(ValueError):
            Raster(grid10, (ch, ch), np.zeros((10, 10, 2)))

    def test_alignment_predicate(self, grid10):
        shifted = Grid(90.0, -60.0, 30.0, 30.0, 4, 4, "utm")
        fractional = Grid(45.0, 0.0, 30.0, 30.0, 4, 4, "utm")
        assert grid10.aligned_with(shifted)
        assert not grid10.aligned_with(fractional)
