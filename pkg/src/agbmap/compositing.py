"""Cloud-free median compositing and windowed temporal averaging.

A :class:`SceneSeries` is a time-ordered stack of co-gridded acquisitions,
optionally paired with scene-classification (SCL) rasters whose integer codes
decide which optical pixels are usable.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .errors import BadClassCode, EmptySeries, EmptyWindow
from .raster import Raster

# SCL codes treated as unusable: no-data, saturated, cloud shadow, medium/high
# cloud, cirrus, snow. Single configurable constant.
CLOUDY_CLASSES = frozenset({0, 1, 3, 8, 9, 10, 11})

# default summertime compositing window
SUMMER_WINDOW_2021 = (date(2021, 6, 1), date(2021, 8, 31))


@dataclass
class SceneSeries:
    """Time-ordered scenes on one grid, with optional parallel SCL rasters."""

    scenes: list[Raster]
    timestamps: list[date]
    scl: list[Raster] | None = None

    def __post_init__(self):
        if len(self.scenes) != len(self.timestamps):
            raise ValueError("scenes and timestamps differ in length")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be strictly increasing")
        if self.scenes:
            g = self.scenes[0].grid
            ch = self.scenes[0].channels
            for s in self.scenes[1:]:
                if not s.grid.same_geometry(g) or s.channels != ch:
                    raise ValueError("all scenes must share one grid and channel set")
            if self.scl is not None:
                if len(self.scl) != len(self.scenes):
                    raise ValueError("scl list length mismatch")
                for s in self.scl:
                    if not s.grid.same_geometry(g):
                        raise ValueError("scl grids must match the scene grid")

    def __len__(self) -> int:
        return len(self.scenes)


def cloud_mask(scl_scene: Raster) -> np.ndarray:
    """Boolean usability mask from an SCL raster: True = non-cloudy pixel."""
    if scl_scene.n_channels != 1:
        raise ValueError("SCL raster must have exactly one channel")
    codes = scl_scene.data[:, :, 0]
    observed = scl_scene.valid_mask
    vals = codes[observed]
    if vals.size and (np.any(vals != np.round(vals)) or vals.min() < 0 or vals.max() > 11):
        raise BadClassCode("SCL codes must be integers in 0..11")
    usable = np.zeros(codes.shape, dtype=bool)
    ok = ~np.isin(codes[observed].astype(int), list(CLOUDY_CLASSES))
    usable[observed] = ok
    return usable


def _usable_stack(series: SceneSeries, indices: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """(T,H,W,C) value stack with NaN at unusable samples, plus usable counts."""
    scenes = [series.scenes[i] for i in indices]
    stack = np.stack([s.data for s in scenes], axis=0)
    usable = np.stack([s.valid_mask for s in scenes], axis=0)
    if series.scl is not None:
        usable &= np.stack([cloud_mask(series.scl[i]) for i in indices], axis=0)
    stack = np.where(usable[:, :, :, None], stack, np.nan)
    return stack, usable.sum(axis=0)


def median_composite(series: SceneSeries) -> Raster:
    """Per-pixel, per-band median over usable observations.

    Pixels with zero usable observations come out invalid; an even number of
    observations yields the mean of the two middle values.
    """
    if len(series) == 0:
        raise EmptySeries("cannot composite an empty series")
    stack, counts = _usable_stack(series, list(range(len(series))))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        out = np.nanmedian(stack, axis=0)
    valid = counts > 0
    out[~valid] = np.nan
    ref = series.scenes[0]
    return Raster(ref.grid, ref.channels, out, valid)


def temporal_mean(series: SceneSeries, window: tuple[date, date]) -> Raster:
    """Per-pixel arithmetic mean over valid observations inside [start, end]."""
    if len(series) == 0:
        raise EmptySeries("cannot average an empty series")
    start, end = window
    idx = [i for i, t in enumerate(series.timestamps) if start <= t <= end]
    if not idx:
        raise EmptyWindow(f"no scenes between {start} and {end}")
    stack, counts = _usable_stack(series, idx)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        out = np.nanmean(stack, axis=0)
    valid = counts > 0
    out[~valid] = np.nan
    ref = series.scenes[0]
    return Raster(ref.grid, ref.channels, out, valid)


def read_manifest(path: str | Path) -> SceneSeries:
    """Load a series from a manifest: one `path,ISO-date[,scl_path]` line per scene."""
    from .geotiff import read_raster

    base = Path(path).parent
    scenes, stamps, scls = [], [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            scenes.append(read_raster(_resolve(base, row[0])))
            stamps.append(date.fromisoformat(row[1].strip()))
            if len(row) > 2 and row[2].strip():
                scls.append(read_raster(_resolve(base, row[2])))
    scl = scls if scls else None
    if scl is not None and len(scl) != len(scenes):
        raise ValueError("manifest mixes scenes with and without SCL paths")
    return SceneSeries(scenes, stamps, scl)


def write_manifest(path: str | Path, entries: list[tuple[str, date, str | None]]) -> None:
    """Write manifest lines (scene_path, date, optional scl_path)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for scene_path, stamp, scl_path in entries:
            row = [scene_path, stamp.isoformat()]
            if scl_path:
                row.append(scl_path)
            writer.writerow(row)


def _resolve(base: Path, p: str) -> Path:
    q = Path(p.strip())
    return q if q.is_absolute() else base / q
