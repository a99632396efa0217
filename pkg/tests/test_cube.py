from __future__ import annotations

import numpy as np
import pytest

from agbmap.cube import (
    Datacube,
    Footprint,
    FootprintSet,
    SplitSpec,
    assemble,
    compute_norm_stats,
    denormalize,
    load_cube,
    match_footprints,
    normalize,
    read_footprints_csv,
    save_cube,
    split,
    write_footprints_csv,
)
from agbmap.errors import (
    CrsMismatch,
    DegenerateChannel,
    GridMismatch,
    MissingModality,
    TooFewUnits,
)
from agbmap.raster import (
    AGB_CHANNEL,
    GPP_CHANNEL,
    S1_CHANNELS,
    S2_CHANNELS,
    Grid,
    Raster,
    pixel_to_world,
)


def _grid(n=10, pixel=30.0, crs="utm"):
    return Grid(0.0, 0.0, pixel, pixel, n, n, crs)


class TestMatchFootprints:
    def test_single_footprint_at_cell_center(self):
        g = _grid()
        x, y = pixel_to_world(g, 3, 5)  # center of column 3, row 5
        fps = FootprintSet([Footprint(float(x), float(y), 120.0)], "utm")
        target, mask, stats = match_footprints(fps, g)
        assert mask.sum() == 1
        assert target.data[5, 3, 0] == 120.0
        assert stats.assigned == 1 and stats.out_of_bounds == 0

    def test_collision_mean(self):
        g = _grid()
        x, y = pixel_to_world(g, 2, 2)
        fps = FootprintSet(
            [Footprint(float(x) - 3, float(y) + 3, 100.0),
             Footprint(float(x) + 3, float(y) - 3, 140.0)], "utm")
        target, mask, _ = match_footprints(fps, g)
        assert mask.sum() == 1
        assert target.data[2, 2, 0] == 120.0

    def test_matches_point_in_cell_oracle(self):
        g = _grid(50)
        rng = np.random.default_rng(17)
        n = 1000
        xs = rng.uniform(-100, 50 * 30 + 100, size=n)
        ys = rng.uniform(-(50 * 30 + 100), 100, size=n)
        vals = rng.uniform(0, 300, size=n)
        fps = FootprintSet(
            [Footprint(float(x), float(y), float(v)) for x, y, v in zip(xs, ys, vals)], "utm")
        target, mask, stats = match_footprints(fps, g)

        # brute-force oracle: loop footprints, test cell bounds directly
        sums = np.zeros((50, 50))
        counts = np.zeros((50, 50), dtype=int)
        oob = 0
        for x, y, v in zip(xs, ys, vals):
            col = int(np.floor(x / 30.0))
            row = int(np.floor(-y / 30.0))
            if 0 <= col < 50 and 0 <= row < 50:
                sums[row, col] += v
                counts[row, col] += 1
            else:
                oob += 1
        want_mask = counts > 0
        assert np.array_equal(mask, want_mask)
        assert np.allclose(target.data[want_mask, 0], sums[want_mask] / counts[want_mask],
                           rtol=0, atol=1e-12)
        assert stats.out_of_bounds == oob
        assert stats.assigned + stats.out_of_bounds == stats.total == n

    def test_conservation_over_random_sets(self):
        g = _grid(20)
        rng = np.random.default_rng(5)
        for _ in range(25):
            n = int(rng.integers(1, 80))
            fps = FootprintSet(
                [Footprint(float(rng.uniform(-200, 800)), float(rng.uniform(-800, 200)),
                           float(rng.uniform(0, 200))) for _ in range(n)], "utm")
            _, _, stats = match_footprints(fps, g)
            assert stats.assigned + stats.out_of_bounds == stats.total == n

    def test_quality_filter(self):
        g = _grid()
        x, y = pixel_to_world(g, 1, 1)
        fps = FootprintSet(
            [Footprint(float(x), float(y), 50.0, quality=False),
             Footprint(float(x), float(y), 70.0, quality=True)], "utm")
        target, mask, stats = match_footprints(fps, g)
        assert target.data[1, 1, 0] == 70.0
        assert stats.low_quality_skipped == 1
        assert stats.total == 1

    def test_crs_mismatch(self):
        fps = FootprintSet([Footprint(0.0, 0.0, 1.0)], "other")
        with pytest.raises(CrsMismatch):
            match_footprints(fps, _grid())


def _modality_rasters(grid, rng, gpp_invalid_at=None):
    s1 = Raster(grid, S1_CHANNELS, rng.normal(size=(grid.height, grid.width, 2)))
    s2 = Raster(grid, S2_CHANNELS, rng.normal(size=(grid.height, grid.width, 12)))
    gpp_mask = np.ones(grid.shape, dtype=bool)
    if gpp_invalid_at is not None:
        gpp_mask[gpp_invalid_at] = False
    gpp = Raster(grid, (GPP_CHANNEL,), rng.normal(size=(grid.height, grid.width, 1)), gpp_mask)
    return {"S1": s1, "S2": s2, "SIF": gpp}


def _target(grid, rng, n_labeled=20):
    mask = np.zeros(grid.shape, dtype=bool)
    flat = rng.choice(grid.width * grid.height, size=n_labeled, replace=False)
    mask.flat[flat] = True
    vals = np.full(grid.shape, np.nan)
    vals[mask] = rng.uniform(0, 300, size=n_labeled)
    return Raster(grid, (AGB_CHANNEL,), vals, mask), mask


class TestAssemble:
    def test_full_subset_is_15_channels(self):
        g = _grid()
        rng = np.random.default_rng(0)
        target, mask = _target(g, rng)
        cube = assemble(_modality_rasters(g, rng), target, mask, "SIF/S1/S2")
        assert len(cube.channels) == 15
        names = [str(c) for c in cube.channels]
        assert names[:2] == ["S1:VV", "S1:VH"]
        assert names[-1] == "SIF:GPP"
        assert len([n for n in names if n.startswith("S2:")]) == 12

    def test_s2_only_is_12_channels(self):
        g = _grid()
        rng = np.random.default_rng(0)
        target, mask = _target(g, rng)
        cube = assemble(_modality_rasters(g, rng), target, mask, "S2-only")
        assert len(cube.channels) == 12

    def test_s1_s2_is_14_channels(self):
        g = _grid()
        rng = np.random.default_rng(0)
        target, mask = _target(g, rng)
        cube = assemble(_modality_rasters(g, rng), target, mask, "S1/S2")
        assert len(cube.channels) == 14

    def test_invalid_input_pixel_not_supervised(self):
        g = _grid()
        rng = np.random.default_rng(1)
        target, mask = _target(g, rng, n_labeled=30)
        labeled = np.argwhere(mask)[0]
        cube = assemble(
            _modality_rasters(g, rng, gpp_invalid_at=tuple(labeled)),
            target, mask, "SIF/S1/S2")
        assert cube.target_mask[tuple(labeled)]
        assert not cube.supervised_mask[tuple(labeled)]

    def test_modality_argument_order_irrelevant(self):
        g = _grid()
        rng = np.random.default_rng(2)
        target, mask = _target(g, rng)
        mods = _modality_rasters(g, rng)
        a = assemble(mods, target, mask, "SIF/S1/S2")
        b = assemble({k: mods[k] for k in reversed(list(mods))}, target, mask, "SIF/S1/S2")
        assert a.channels == b.channels
        assert np.array_equal(a.inputs.data[a.inputs.valid_mask],
                              b.inputs.data[b.inputs.valid_mask])

    def test_missing_modality(self):
        g = _grid()
        rng = np.random.default_rng(3)
        target, mask = _target(g, rng)
        mods = _modality_rasters(g, rng)
        del mods["SIF"]
        with pytest.raises(MissingModality):
            assemble(mods, target, mask, "SIF/S1/S2")

    def test_grid_mismatch(self):
        g = _grid()
        rng = np.random.default_rng(4)
        target, mask = _target(g, rng)
        mods = _modality_rasters(g, rng)
        other = _grid(10, pixel=60.0)
        mods["S1"] = Raster(other, S1_CHANNELS, rng.normal(size=(10, 10, 2)))
        with pytest.raises(GridMismatch):
            assemble(mods, target, mask, "SIF/S1/S2")


def _small_cube(seed=0, n=10, n_labeled=30, subset="SIF/S1/S2"):
    g = _grid(n)
    rng = np.random.default_rng(seed)
    target, mask = _target(g, rng, n_labeled)
    return assemble(_modality_rasters(g, rng), target, mask, subset)


class TestNormalize:
    def test_constant_channel_degenerate(self):
        cube = _small_cube()
        cube.inputs.data[:, :, 3] = 5.0
        with pytest.raises(DegenerateChannel):
            normalize(cube)

    def test_two_value_channel_hand_zscore(self):
        cube = _small_cube(n=10)
        vals = np.zeros((10, 10))
        vals[:, 5:] = 10.0
        cube.inputs.data[:, :, 0] = vals
        out = normalize(cube)
        got = out.inputs.data[:, :, 0]
        # population std of {0,10} at equal counts is 5 -> z-scores -1 and +1
        assert np.allclose(np.unique(got), [-1.0, 1.0])

    def test_round_trip(self):
        cube = _small_cube(seed=7)
        normed = normalize(cube)
        back = denormalize(normed)
        assert np.allclose(back.inputs.data[cube.inputs.valid_mask],
                           cube.inputs.data[cube.inputs.valid_mask], atol=1e-9)

    def test_double_normalize_differs(self):
        cube = _small_cube(seed=8)
        once = normalize(cube)
        twice = normalize(once, once.norm_stats)
        assert not np.allclose(once.inputs.data[cube.inputs.valid_mask],
                               twice.inputs.data[cube.inputs.valid_mask])

    def test_normalized_moments(self):
        cube = _small_cube(seed=9)
        out = normalize(cube)
        sel = out.inputs.valid_mask
        for k in range(len(out.channels)):
            vals = out.inputs.data[:, :, k][sel]
            assert abs(vals.mean()) < 1e-6
            assert abs(vals.std() - 1.0) < 1e-6

    def test_target_untouched(self):
        cube = _small_cube(seed=10)
        out = normalize(cube)
        assert np.array_equal(out.target.data[out.target_mask],
                              cube.target.data[cube.target_mask])

    def test_validation_path_uses_given_stats(self):
        train = _small_cube(seed=11)
        val = _small_cube(seed=12)
        stats = compute_norm_stats(train)
        out = normalize(val, stats)
        assert out.norm_stats == stats


class TestSplit:
    def test_pixel_split_90_10(self):
        cube = _small_cube(seed=1, n=20, n_labeled=100)
        train, test = split(cube, SplitSpec(unit="pixel", seed=3))
        assert train.n_supervised == 90
        assert test.n_supervised == 10

    def test_disjoint_and_exhaustive(self):
        cube = _small_cube(seed=2, n=20, n_labeled=73)
        train, test = split(cube, SplitSpec(unit="pixel", seed=4))
        both = train.supervised_mask & test.supervised_mask
        either = train.supervised_mask | test.supervised_mask
        assert not both.any()
        assert np.array_equal(either, cube.supervised_mask)

    def test_same_seed_identical_different_seed_differs(self):
        cube = _small_cube(seed=3, n=20, n_labeled=120)
        a1, _ = split(cube, SplitSpec(unit="pixel", seed=5))
        a2, _ = split(cube, SplitSpec(unit="pixel", seed=5))
        b1, _ = split(cube, SplitSpec(unit="pixel", seed=6))
        assert np.array_equal(a1.target_mask, a2.target_mask)
        assert not np.array_equal(a1.target_mask, b1.target_mask)

    def test_tile_split_9_1(self):
        # 100x100 grid, 10 supervised tiles of 20px: place >=1 label in 10 tiles
        g = _grid(100)
        rng = np.random.default_rng(13)
        mask = np.zeros(g.shape, dtype=bool)
        tiles = [(r, c) for r in range(5) for c in range(5)][:10]
        for (tr, tc) in tiles:
            mask[tr * 20 + 10, tc * 20 + 10] = True
        vals = np.where(mask, 100.0, np.nan)
        target = Raster(g, (AGB_CHANNEL,), vals, mask)
        cube = assemble(_modality_rasters(g, rng), target, mask, "S2-only")
        train, test = split(cube, SplitSpec(unit="tile", seed=0, tile_size=20))
        assert len(train.windows) == 9
        assert len(test.windows) == 1
        # a tile goes wholly to one side
        assert train.n_supervised == 9 and test.n_supervised == 1

    def test_too_few_units(self):
        cube = _small_cube(seed=4, n=10, n_labeled=5)
        with pytest.raises(TooFewUnits):
            split(cube, SplitSpec(unit="pixel", seed=0))


class TestPersistence:
    def test_footprint_csv_round_trip(self, tmp_path):
        fps = FootprintSet(
            [Footprint(10.5, -20.25, 120.0, True, "a"),
             Footprint(400.0, -310.0, 0.0, False, "b")], "utm")
        path = tmp_path / "fps.csv"
        write_footprints_csv(path, fps)
        back = read_footprints_csv(path, "utm")
        assert back.footprints == fps.footprints

    def test_cube_round_trip(self, tmp_path):
        cube = normalize(_small_cube(seed=21))
        path = tmp_path / "cube.tif"
        save_cube(path, cube)
        back = load_cube(path)
        assert back.modality_subset == cube.modality_subset
        assert back.channels == cube.channels
        assert back.norm_stats == cube.norm_stats
        assert np.array_equal(back.supervised_mask, cube.supervised_mask)
        sel = cube.inputs.valid_mask
        assert np.allclose(back.inputs.data[sel], cube.inputs.data[sel])
        assert np.allclose(back.target.data[cube.target_mask],
                           cube.target.data[cube.target_mask])
