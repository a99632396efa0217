"""Footprint-to-grid matching and multi-modal datacube assembly.

The datacube stacks normalized input channels in a fixed canonical order,
carries the sparse supervision layer (mean footprint biomass per cell) and its
mask, and remembers the normalization statistics so validation cubes can be
scaled identically.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    CrsMismatch,
    DegenerateChannel,
    GridMismatch,
    MissingModality,
    TooFewUnits,
)
from .raster import (
    AGB_CHANNEL,
    GPP_CHANNEL,
    S1_CHANNELS,
    S2_CHANNELS,
    ChannelId,
    Grid,
    Raster,
    Window,
    tile_windows,
    world_to_pixel,
)

MODALITY_SUBSETS = ("SIF/S1/S2", "S1/S2", "S2-only")

SUBSET_CHANNELS: dict[str, tuple[ChannelId, ...]] = {
    "SIF/S1/S2": S1_CHANNELS + S2_CHANNELS + (GPP_CHANNEL,),
    "S1/S2": S1_CHANNELS + S2_CHANNELS,
    "S2-only": S2_CHANNELS,
}


@dataclass(frozen=True)
class Footprint:
    """One sparse biomass measurement at a map coordinate."""

    x: float
    y: float
    agb: float
    quality: bool = True
    source_id: str = ""

    def __post_init__(self):
        if not np.isfinite(self.agb) or self.agb < 0:
            raise ValueError("agb must be finite and >= 0")


@dataclass
class FootprintSet:
    footprints: list[Footprint]
    crs_id: str = "local"

    def __len__(self) -> int:
        return len(self.footprints)


@dataclass(frozen=True)
class MatchStats:
    """Bookkeeping from footprint matching; assigned + out_of_bounds == total."""

    total: int
    assigned: int
    out_of_bounds: int
    low_quality_skipped: int
    cells: int


@dataclass
class Datacube:
    """Stacked input channels + sparse target + validity masks on one grid."""

    grid: Grid
    inputs: Raster
    target: Raster
    target_mask: np.ndarray
    modality_subset: str
    norm_stats: list[tuple[float, float]] | None = None
    windows: list[Window] | None = None  # tile-unit split views carry their tiles

    def __post_init__(self):
        if not self.inputs.grid.same_geometry(self.grid) or not self.target.grid.same_geometry(self.grid):
            raise GridMismatch("cube layers must share one grid")
        self.target_mask = np.asarray(self.target_mask, dtype=bool)
        if self.target_mask.shape != self.grid.shape:
            raise ValueError("target_mask shape mismatch")
        if self.modality_subset not in MODALITY_SUBSETS:
            raise ValueError(f"unknown modality subset {self.modality_subset!r}")
        bad = self.target_mask & ~self.target.valid_mask
        if bad.any():
            raise ValueError("target_mask=true requires a valid, finite target value")

    @property
    def channels(self) -> tuple[ChannelId, ...]:
        return self.inputs.channels

    @property
    def supervised_mask(self) -> np.ndarray:
        """Pixels usable for training: labeled AND valid in every input channel."""
        return self.target_mask & self.inputs.valid_mask

    @property
    def n_supervised(self) -> int:
        return int(self.supervised_mask.sum())


def match_footprints(fps: FootprintSet, grid: Grid) -> tuple[Raster, np.ndarray, MatchStats]:
    """Assign footprints to containing cells; collided cells take the mean."""
    if fps.crs_id != grid.crs_id:
        raise CrsMismatch(f"footprints crs {fps.crs_id!r} != grid crs {grid.crs_id!r}")
    usable = [f for f in fps.footprints if f.quality]
    skipped = len(fps.footprints) - len(usable)

    sums = np.zeros(grid.shape)
    counts = np.zeros(grid.shape, dtype=int)
    oob = 0
    if usable:
        xs = np.array([f.x for f in usable])
        ys = np.array([f.y for f in usable])
        vals = np.array([f.agb for f in usable])
        col_f, row_f = world_to_pixel(grid, xs, ys)
        cols = np.floor(col_f + 0.5).astype(int)
        rows = np.floor(row_f + 0.5).astype(int)
        inside = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
        oob = int((~inside).sum())
        np.add.at(sums, (rows[inside], cols[inside]), vals[inside])
        np.add.at(counts, (rows[inside], cols[inside]), 1)

    mask = counts > 0
    target = np.full(grid.shape, np.nan)
    target[mask] = sums[mask] / counts[mask]
    stats = MatchStats(
        total=len(usable),
        assigned=len(usable) - oob,
        out_of_bounds=oob,
        low_quality_skipped=skipped,
        cells=int(mask.sum()),
    )
    return Raster(grid, (AGB_CHANNEL,), target, mask), mask, stats


def assemble(inputs_by_modality: dict[str, Raster], target: Raster,
             target_mask: np.ndarray, subset: str) -> Datacube:
    """Stack modality rasters into a cube with canonical channel order."""
    if subset not in SUBSET_CHANNELS:
        raise ValueError(f"unknown modality subset {subset!r}")
    wanted = SUBSET_CHANNELS[subset]
    grid = target.grid
    available: dict[ChannelId, tuple[Raster, int]] = {}
    for raster in inputs_by_modality.values():
        if not raster.grid.same_geometry(grid):
            raise GridMismatch("input raster grid does not match the target grid")
        for i, ch in enumerate(raster.channels):
            available[ch] = (raster, i)
    missing = [str(ch) for ch in wanted if ch not in available]
    if missing:
        raise MissingModality(f"channels missing for subset {subset!r}: {', '.join(missing)}")

    data = np.empty((grid.height, grid.width, len(wanted)))
    valid = np.ones(grid.shape, dtype=bool)
    for k, ch in enumerate(wanted):
        raster, i = available[ch]
        data[:, :, k] = raster.data[:, :, i]
        valid &= raster.valid_mask
    inputs = Raster(grid, wanted, data, valid)
    mask = np.asarray(target_mask, dtype=bool) & target.valid_mask
    return Datacube(grid, inputs, target, mask, subset)


def compute_norm_stats(cube: Datacube, within: np.ndarray | None = None) -> list[tuple[float, float]]:
    """Per-channel (mean, population std) over valid input pixels.

    ``within`` optionally restricts the pixel population (e.g. to train tiles)
    so held-out data never leaks into the statistics.
    """
    sel = cube.inputs.valid_mask if within is None else (cube.inputs.valid_mask & within)
    if sel.sum() < 2:
        raise DegenerateChannel("need at least 2 valid pixels to compute stats")
    stats = []
    for k, ch in enumerate(cube.channels):
        vals = cube.inputs.data[:, :, k][sel]
        mean = float(vals.mean())
        std = float(vals.std())
        if std < 1e-12:
            raise DegenerateChannel(f"channel {ch} is constant over the stats population")
        stats.append((mean, std))
    return stats


def normalize(cube: Datacube, stats: list[tuple[float, float]] | None = None,
              within: np.ndarray | None = None) -> Datacube:
    """Z-score input channels; the target layer is never normalized."""
    if stats is None:
        stats = compute_norm_stats(cube, within)
    if len(stats) != len(cube.channels):
        raise ValueError("stats length does not match channel count")
    data = cube.inputs.data.copy()
    for k, (mean, std) in enumerate(stats):
        if std < 1e-12:
            raise DegenerateChannel(f"channel {cube.channels[k]} has degenerate std")
        data[:, :, k] = (data[:, :, k] - mean) / std
    inputs = Raster(cube.grid, cube.channels, data, cube.inputs.valid_mask.copy())
    return replace(cube, inputs=inputs, norm_stats=[(float(m), float(s)) for m, s in stats])


def denormalize(cube: Datacube) -> Datacube:
    """Invert normalize using the cube's recorded stats."""
    if cube.norm_stats is None:
        raise ValueError("cube carries no normalization stats")
    data = cube.inputs.data.copy()
    for k, (mean, std) in enumerate(cube.norm_stats):
        data[:, :, k] = data[:, :, k] * std + mean
    inputs = Raster(cube.grid, cube.channels, data, cube.inputs.valid_mask.copy())
    return replace(cube, inputs=inputs, norm_stats=None)


@dataclass(frozen=True)
class SplitSpec:
    """90/10 train-test split; tabular models split pixels, the UNet splits tiles."""

    train_fraction: float = 0.9
    unit: str = "pixel"  # "pixel" | "tile"
    seed: int = 0
    tile_size: int = 512

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.unit not in ("pixel", "tile"):
            raise ValueError("unit must be 'pixel' or 'tile'")


def split(cube: Datacube, spec: SplitSpec) -> tuple[Datacube, Datacube]:
    """Deterministic seeded partition of supervised units into train and test."""
    rng = np.random.default_rng(spec.seed)
    if spec.unit == "pixel":
        flat = np.flatnonzero(cube.supervised_mask)
        if flat.size < 10:
            raise TooFewUnits(f"{flat.size} supervised pixels, need >= 10")
        order = rng.permutation(flat.size)
        n_train = int(round(spec.train_fraction * flat.size))
        n_train = min(max(n_train, 1), flat.size - 1)
        train_idx = flat[order[:n_train]]
        test_idx = flat[order[n_train:]]
        train_mask = np.zeros(cube.grid.shape, dtype=bool)
        test_mask = np.zeros(cube.grid.shape, dtype=bool)
        train_mask.flat[train_idx] = True
        test_mask.flat[test_idx] = True
        train = replace(cube, target_mask=cube.target_mask & train_mask, windows=None)
        test = replace(cube, target_mask=cube.target_mask & test_mask, windows=None)
        return train, test

    windows = tile_windows(cube.grid.height, cube.grid.width, spec.tile_size, spec.tile_size)
    units = [w for w in windows if _window_has_supervision(cube, w)]
    if len(units) < 10:
        raise TooFewUnits(f"{len(units)} supervised tiles, need >= 10")
    order = rng.permutation(len(units))
    n_train = int(round(spec.train_fraction * len(units)))
    n_train = min(max(n_train, 1), len(units) - 1)
    train_windows = [units[i] for i in sorted(order[:n_train])]
    test_windows = [units[i] for i in sorted(order[n_train:])]
    train = replace(cube, target_mask=cube.target_mask & _windows_mask(cube.grid, train_windows),
                    windows=train_windows)
    test = replace(cube, target_mask=cube.target_mask & _windows_mask(cube.grid, test_windows),
                   windows=test_windows)
    return train, test


def _window_has_supervision(cube: Datacube, w: Window) -> bool:
    sup = cube.supervised_mask
    return bool(sup[w.row0:w.row0 + w.height, w.col0:w.col0 + w.width].any())


def _windows_mask(grid: Grid, windows: list[Window]) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    for w in windows:
        mask[w.row0:w.row0 + w.height, w.col0:w.col0 + w.width] = True
    return mask


# ---------------------------------------------------------------------------
# persistence

def read_footprints_csv(path: str | Path, crs_id: str = "local") -> FootprintSet:
    """Footprints from CSV with header x,y,agb,quality,source_id."""
    fps = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            fps.append(Footprint(
                x=float(row["x"]),
                y=float(row["y"]),
                agb=float(row["agb"]),
                quality=row.get("quality", "true").strip().lower() in ("1", "true", "t", "yes"),
                source_id=row.get("source_id", ""),
            ))
    return FootprintSet(fps, crs_id)


def write_footprints_csv(path: str | Path, fps: FootprintSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "agb", "quality", "source_id"])
        for f in fps.footprints:
            writer.writerow([repr(f.x), repr(f.y), repr(f.agb),
                             "true" if f.quality else "false", f.source_id])


def save_cube(path: str | Path, cube: Datacube, extra: dict | None = None) -> None:
    """Persist as one multi-band GeoTIFF (inputs + target band) + JSON sidecar."""
    from .geotiff import write_bands

    path = Path(path)
    data = np.concatenate([cube.inputs.data, cube.target.data], axis=2)
    data[~cube.inputs.valid_mask, :len(cube.channels)] = np.nan
    data[~cube.target_mask, len(cube.channels):] = np.nan
    channels = cube.channels + (AGB_CHANNEL,)
    write_bands(path, cube.grid, channels, data)
    sidecar = {
        "channels": [str(c) for c in cube.channels],
        "modality_subset": cube.modality_subset,
        "norm_stats": cube.norm_stats,
    }
    if extra:
        sidecar.update(extra)
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_cube(path: str | Path) -> Datacube:
    from .geotiff import read_bands

    path = Path(path)
    grid, channels, data, _ = read_bands(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    n_in = len(sidecar["channels"])
    in_channels = tuple(ChannelId.parse(c) for c in sidecar["channels"])
    inputs_data = data[:, :, :n_in]
    inputs_valid = np.isfinite(inputs_data).all(axis=2)
    target_data = data[:, :, n_in:]
    target_mask = np.isfinite(target_data[:, :, 0])
    inputs = Raster(grid, in_channels, inputs_data, inputs_valid)
    target = Raster(grid, (AGB_CHANNEL,), target_data, target_mask)
    stats = sidecar.get("norm_stats")
    return Datacube(
        grid, inputs, target, target_mask, sidecar["modality_subset"],
        norm_stats=[(float(m), float(s)) for m, s in stats] if stats else None,
    )
