"""Georeferenced raster data model: grids, coordinate algebra, resampling, tiling.

Conventions used throughout the package:

* pixel (0, 0) is the upper-left pixel and fractional index (0.0, 0.0) is its
  *center*;
* grids are north-up by default (map y decreases as row index grows), with the
  pixel size stored as a positive magnitude plus the ``y_down`` direction flag;
* invalid pixels carry NaN in ``data`` and ``False`` in ``valid_mask`` -- all
  arithmetic must consult the mask, never the sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CrsMismatch, EmptySource, GridMismatch

MODALITIES = ("S1", "S2", "SIF", "TARGET", "SCL", "ZONE")

S1_BANDS = ("VV", "VH")
# Surface-reflectance band set; B10 (atmospheric) is not part of it.
S2_BANDS = ("B01", "B02", "B03", "B04", "B05", "B06", "B07", "B08",
            "B8A", "B09", "B11", "B12")


@dataclass(frozen=True)
class ChannelId:
    """Identifies one raster band as (modality, band_name)."""

    modality: str
    band_name: str

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")

    def __str__(self) -> str:
        return f"{self.modality}:{self.band_name}"

    @classmethod
    def parse(cls, text: str) -> "ChannelId":
        modality, _, band = text.partition(":")
        return cls(modality, band)


S1_CHANNELS = tuple(ChannelId("S1", b) for b in S1_BANDS)
S2_CHANNELS = tuple(ChannelId("S2", b) for b in S2_BANDS)
GPP_CHANNEL = ChannelId("SIF", "GPP")
AGB_CHANNEL = ChannelId("TARGET", "AGB")
SCL_CHANNEL = ChannelId("SCL", "SCL")
ZONE_CHANNEL = ChannelId("ZONE", "ZONE")


@dataclass(frozen=True)
class Grid:
    """Affine-georeferenced pixel grid (rectilinear, no rotation).

    ``origin_x, origin_y`` are the map coordinates of the *outer corner* of the
    upper-left pixel. Pixel sizes are positive magnitudes; ``y_down`` records
    the conventional north-up orientation (row index grows southward).
    """

    origin_x: float
    origin_y: float
    pixel_size_x: float
    pixel_size_y: float
    width: int
    height: int
    crs_id: str = "local"
    y_down: bool = True

    def __post_init__(self):
        if self.pixel_size_x <= 0 or self.pixel_size_y <= 0:
            raise ValueError("pixel sizes must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def aligned_with(self, other: "Grid", tol: float = 1e-6) -> bool:
        """True iff same CRS, same pixel sizes, origins offset by whole pixels."""
        if self.crs_id != other.crs_id or self.y_down != other.y_down:
            return False
        if not (math.isclose(self.pixel_size_x, other.pixel_size_x, rel_tol=0, abs_tol=tol)
                and math.isclose(self.pixel_size_y, other.pixel_size_y, rel_tol=0, abs_tol=tol)):
            return False
        dx = (other.origin_x - self.origin_x) / self.pixel_size_x
        dy = (other.origin_y - self.origin_y) / self.pixel_size_y
        return abs(dx - round(dx)) < tol and abs(dy - round(dy)) < tol

    def same_geometry(self, other: "Grid", tol: float = 1e-6) -> bool:
        return (self.aligned_with(other, tol)
                and self.width == other.width and self.height == other.height
                and abs(self.origin_x - other.origin_x) < tol * self.pixel_size_x
                and abs(self.origin_y - other.origin_y) < tol * self.pixel_size_y)


def world_to_pixel(grid: Grid, x, y):
    """Map coordinates -> fractional (col, row); (0.0, 0.0) is the UL pixel center."""
    col = (np.asarray(x, dtype=float) - grid.origin_x) / grid.pixel_size_x - 0.5
    if grid.y_down:
        row = (grid.origin_y - np.asarray(y, dtype=float)) / grid.pixel_size_y - 0.5
    else:
        row = (np.asarray(y, dtype=float) - grid.origin_y) / grid.pixel_size_y - 0.5
    return col, row


def pixel_to_world(grid: Grid, col, row):
    """Fractional (col, row) -> map coordinates of that point (inverse of world_to_pixel)."""
    x = grid.origin_x + (np.asarray(col, dtype=float) + 0.5) * grid.pixel_size_x
    if grid.y_down:
        y = grid.origin_y - (np.asarray(row, dtype=float) + 0.5) * grid.pixel_size_y
    else:
        y = grid.origin_y + (np.asarray(row, dtype=float) + 0.5) * grid.pixel_size_y
    return x, y


@dataclass
class Raster:
    """Multi-channel pixel array on a grid with a shared validity mask.

    ``data`` has shape (height, width, n_channels) and holds NaN at every
    invalid pixel; ``valid_mask`` is (height, width).
    """

    grid: Grid
    channels: tuple[ChannelId, ...]
    data: np.ndarray
    valid_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.channels = tuple(self.channels)
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("duplicate channel ids")
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.shape[:2] != (self.grid.height, self.grid.width):
            raise ValueError(f"data shape {data.shape} does not match grid {self.grid.shape}")
        if data.shape[2] != len(self.channels):
            raise ValueError("channel count mismatch")
        if self.valid_mask is None:
            mask = np.all(np.isfinite(data), axis=2)
        else:
            mask = np.asarray(self.valid_mask, dtype=bool)
            if mask.shape != (self.grid.height, self.grid.width):
                raise ValueError("valid_mask shape mismatch")
        data = data.copy()
        data[~mask] = np.nan
        if not np.all(np.isfinite(data[mask])):
            raise ValueError("non-finite values at valid pixels")
        self.data = data
        self.valid_mask = mask

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def channel_index(self, channel: ChannelId) -> int:
        try:
            return self.channels.index(channel)
        except ValueError:
            raise KeyError(f"raster has no channel {channel}") from None

    def band(self, channel: ChannelId) -> np.ndarray:
        """2-D view of one channel's values (NaN where invalid)."""
        return self.data[:, :, self.channel_index(channel)]

    def select(self, channels) -> "Raster":
        idx = [self.channel_index(c) for c in channels]
        return Raster(self.grid, tuple(channels), self.data[:, :, idx], self.valid_mask.copy())

    def copy(self) -> "Raster":
        return Raster(self.grid, self.channels, self.data.copy(), self.valid_mask.copy())


def single_band(grid: Grid, channel: ChannelId, values: np.ndarray,
                valid_mask: np.ndarray | None = None) -> Raster:
    return Raster(grid, (channel,), np.asarray(values, dtype=np.float64), valid_mask)


def bilinear_resample(src: Raster, target: Grid) -> Raster:
    """Resample ``src`` onto ``target`` by blending the 4 nearest source centers.

    An output pixel is valid iff the bilinear weight carried by valid source
    neighbors is >= 0.5; surviving weights are renormalized so the output stays
    a convex combination of valid neighbor values. Aligned grids short-circuit
    to an exact windowed copy.
    """
    if src.grid.crs_id != target.crs_id:
        raise CrsMismatch(f"source crs {src.grid.crs_id!r} != target crs {target.crs_id!r}")
    if not np.any(src.valid_mask):
        raise EmptySource("source raster has no valid pixels")

    if src.grid.aligned_with(target):
        return _aligned_copy(src, target)

    h, w = target.height, target.width
    cols = np.arange(w, dtype=float)
    rows = np.arange(h, dtype=float)
    xs, _ = pixel_to_world(target, cols, np.zeros_like(cols))
    _, ys = pixel_to_world(target, np.zeros_like(rows), rows)
    xg, yg = np.meshgrid(xs, ys)
    cgrid, rgrid = world_to_pixel(src.grid, xg, yg)

    c0 = np.floor(cgrid).astype(int)
    r0 = np.floor(rgrid).astype(int)
    fc = cgrid - c0
    fr = rgrid - r0

    weight_sum = np.zeros((h, w))
    value_sum = np.zeros((h, w, src.n_channels))

    for dr, dc, wgt in (
        (0, 0, (1 - fr) * (1 - fc)),
        (0, 1, (1 - fr) * fc),
        (1, 0, fr * (1 - fc)),
        (1, 1, fr * fc),
    ):
        rr = r0 + dr
        cc = c0 + dc
        inside = (rr >= 0) & (rr < src.grid.height) & (cc >= 0) & (cc < src.grid.width)
        rr_c = np.clip(rr, 0, src.grid.height - 1)
        cc_c = np.clip(cc, 0, src.grid.width - 1)
        usable = inside & src.valid_mask[rr_c, cc_c]
        wgt = np.where(usable, wgt, 0.0)
        vals = np.where(usable[:, :, None], np.nan_to_num(src.data[rr_c, cc_c, :]), 0.0)
        weight_sum += wgt
        value_sum += wgt[:, :, None] * vals
    valid = weight_sum >= 0.5
    with np.errstate(invalid="ignore", divide="ignore"):
        out = value_sum / weight_sum[:, :, None]
    out[~valid] = np.nan
    return Raster(target, src.channels, out, valid)


def _aligned_copy(src: Raster, target: Grid) -> Raster:
    """Exact copy of the overlapping window for integer-offset grids."""
    dcol = (target.origin_x - src.grid.origin_x) / src.grid.pixel_size_x
    if src.grid.y_down:
        drow = (src.grid.origin_y - target.origin_y) / src.grid.pixel_size_y
    else:
        drow = (target.origin_y - src.grid.origin_y) / src.grid.pixel_size_y
    dcol = int(round(dcol))
    drow = int(round(drow))
    out = np.full((target.height, target.width, src.n_channels), np.nan)
    mask = np.zeros((target.height, target.width), dtype=bool)
    r0 = max(0, -drow)
    c0 = max(0, -dcol)
    r1 = min(target.height, src.grid.height - drow)
    c1 = min(target.width, src.grid.width - dcol)
    if r1 > r0 and c1 > c0:
        out[r0:r1, c0:c1, :] = src.data[r0 + drow:r1 + drow, c0 + dcol:c1 + dcol, :]
        mask[r0:r1, c0:c1] = src.valid_mask[r0 + drow:r1 + drow, c0 + dcol:c1 + dcol]
    return Raster(target, src.channels, out, mask)


@dataclass(frozen=True)
class Window:
    """Pixel window: origin (row0, col0) and size; may overhang the raster."""

    row0: int
    col0: int
    height: int
    width: int

    def overlaps_interior(self, grid_h: int, grid_w: int) -> tuple[int, int]:
        """Rows/cols of the window actually inside the raster."""
        return (min(self.height, grid_h - self.row0), min(self.width, grid_w - self.col0))


@dataclass
class TileView:
    """One tile cut from a raster; ``padded`` marks reflection-filled edges."""

    window: Window
    raster: Raster
    padded: bool


def tile_windows(height: int, width: int, tile_size: int, stride: int) -> list[Window]:
    """Window origins covering the raster; ordered row-major by origin."""
    if tile_size < 1 or stride < 1:
        raise ValueError("tile_size and stride must be >= 1")
    rows = list(range(0, height, stride))
    cols = list(range(0, width, stride))
    return [Window(r, c, tile_size, tile_size) for r in rows for c in cols]


def _reflect_to(arr: np.ndarray, size_y: int, size_x: int) -> np.ndarray:
    """Grow arr to (size_y, size_x, ...) by repeated mirror padding at bottom/right."""
    while arr.shape[0] < size_y or arr.shape[1] < size_x:
        pad_y = min(arr.shape[0], size_y - arr.shape[0])
        pad_x = min(arr.shape[1], size_x - arr.shape[1])
        pad = [(0, pad_y), (0, pad_x)] + [(0, 0)] * (arr.ndim - 2)
        arr = np.pad(arr, pad, mode="symmetric")
    return arr


def extract_window(raster: Raster, window: Window) -> Raster:
    """Cut one window out of a raster, mirror-padding any overhang."""
    in_h, in_w = window.overlaps_interior(raster.grid.height, raster.grid.width)
    if in_h <= 0 or in_w <= 0:
        raise ValueError("window does not intersect the raster")
    data = raster.data[window.row0:window.row0 + in_h, window.col0:window.col0 + in_w, :]
    mask = raster.valid_mask[window.row0:window.row0 + in_h, window.col0:window.col0 + in_w]
    data = _reflect_to(data, window.height, window.width)
    mask = _reflect_to(mask, window.height, window.width)
    g = raster.grid
    ox = g.origin_x + window.col0 * g.pixel_size_x
    oy = g.origin_y - window.row0 * g.pixel_size_y if g.y_down else g.origin_y + window.row0 * g.pixel_size_y
    grid = Grid(ox, oy, g.pixel_size_x, g.pixel_size_y, window.width, window.height,
                g.crs_id, g.y_down)
    return Raster(grid, raster.channels, data, mask)


def tile(raster: Raster, tile_size: int, stride: int) -> list[TileView]:
    """Cover the raster with (possibly padded) tiles, row-major by origin."""
    views = []
    for win in tile_windows(raster.grid.height, raster.grid.width, tile_size, stride):
        in_h, in_w = win.overlaps_interior(raster.grid.height, raster.grid.width)
        padded = in_h < win.height or in_w < win.width
        views.append(TileView(win, extract_window(raster, win), padded))
    return views


def subgrid(grid: Grid, window: Window) -> Grid:
    """Grid of a window cut from ``grid`` (window may overhang)."""
    ox = grid.origin_x + window.col0 * grid.pixel_size_x
    oy = grid.origin_y - window.row0 * grid.pixel_size_y if grid.y_down \
        else grid.origin_y + window.row0 * grid.pixel_size_y
    return Grid(ox, oy, grid.pixel_size_x, grid.pixel_size_y,
                window.width, window.height, grid.crs_id, grid.y_down)


def require_same_grid(a: Grid, b: Grid, what: str = "rasters") -> None:
    if not a.same_geometry(b):
        raise GridMismatch(f"{what} are not on the same grid")
