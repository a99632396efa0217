"""Synthetic landscapes with known biomass ground truth.

Scenes are built from a continuous random field (sum of seeded Gaussian
bumps) so the same landscape can be sampled on the 30 m target grid, a finer
radar grid, and a coarser photosynthesis grid. Channel values are fixed
monotone, saturating functions of biomass plus seeded noise; optical scenes
get bright cloud decks with matching scene-classification rasters; footprints
follow a thinned line-track pattern with along:across spacing 1:10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .compositing import SceneSeries, write_manifest
from .cube import Footprint, FootprintSet, write_footprints_csv
from .raster import (
    AGB_CHANNEL,
    GPP_CHANNEL,
    S1_CHANNELS,
    S2_BANDS,
    S2_CHANNELS,
    SCL_CHANNEL,
    ChannelId,
    Grid,
    Raster,
    pixel_to_world,
)

_B08 = ChannelId("S2", "B08")
_B12 = ChannelId("S2", "B12")

# rng stream tags, one per independent noise source
_FIELD, _S2, _CLOUD, _S1, _GPP, _TRACKS, _BURN = range(7)


@dataclass(frozen=True)
class SceneParams:
    size: int = 256
    seed: int = 0
    agb_range: tuple[float, float] = (0.0, 300.0)
    s2_noise: float = 0.02
    s1_noise: float = 0.8
    gpp_noise: float = 0.6
    gpp_informative: bool = True
    cloud_fraction: float = 0.25
    footprint_density: float = 4.0      # footprints per 1000 pixels
    footprint_noise: float = 5.0        # Mg C/ha measurement noise
    n_timestamps: int = 5
    pixel_size: float = 30.0
    crs_id: str = "synthetic-utm"
    along_track_step: int = 2
    across_track_step: int = 20

    def __post_init__(self):
        lo, hi = self.agb_range
        if lo < 0 or hi < lo:
            raise ValueError("agb_range must satisfy 0 <= lo <= hi")
        if min(self.s2_noise, self.s1_noise, self.gpp_noise, self.footprint_noise) < 0:
            raise ValueError("noise stds must be >= 0")
        if not 0.0 <= self.cloud_fraction <= 1.0:
            raise ValueError("cloud_fraction must be in [0, 1]")
        if self.size < 8:
            raise ValueError("size must be >= 8")


@dataclass
class SyntheticScene:
    params: SceneParams
    true_agb: Raster            # on the 30 m target grid
    s2: SceneSeries             # 12 bands + SCL, target grid
    s1: SceneSeries             # VV/VH on a finer offset grid
    sif: SceneSeries            # GPP on a coarser offset grid

    @property
    def grid(self) -> Grid:
        return self.true_agb.grid


def _rng(params: SceneParams, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((params.seed, tag)))


class _BumpField:
    """Continuous sum-of-Gaussian-bumps field, evaluable on any grid."""

    def __init__(self, rng: np.random.Generator, extent: float, n_bumps: int):
        self.cx = rng.uniform(0, extent, n_bumps)
        self.cy = rng.uniform(-extent, 0, n_bumps)
        self.sigma = rng.uniform(extent / 16, extent / 4, n_bumps)
        self.amp = rng.uniform(-1.0, 1.0, n_bumps)

    def sample(self, grid: Grid) -> np.ndarray:
        cols = np.arange(grid.width, dtype=float)
        rows = np.arange(grid.height, dtype=float)
        xs, _ = pixel_to_world(grid, cols, np.zeros_like(cols))
        _, ys = pixel_to_world(grid, np.zeros_like(rows), rows)
        xg, yg = np.meshgrid(xs, ys)
        out = np.zeros(grid.shape)
        for cx, cy, s, a in zip(self.cx, self.cy, self.sigma, self.amp):
            out += a * np.exp(-((xg - cx) ** 2 + (yg - cy) ** 2) / (2 * s * s))
        return out


def target_grid(params: SceneParams) -> Grid:
    return Grid(0.0, 0.0, params.pixel_size, params.pixel_size,
                params.size, params.size, params.crs_id)


def _s1_grid(params: SceneParams) -> Grid:
    # finer, fractionally offset grid; the pipeline resamples it to 30 m
    px = params.pixel_size * 2 / 3
    n = math.ceil(params.size * params.pixel_size / px)
    return Grid(-7.0, 7.0, px, px, n, n, params.crs_id)


def _gpp_grid(params: SceneParams) -> Grid:
    px = params.pixel_size * 3
    n = math.ceil(params.size / 3)
    return Grid(-13.0, 13.0, px, px, n, n, params.crs_id)


def _saturating(a: np.ndarray, k: float) -> np.ndarray:
    return (1.0 - np.exp(-k * a)) / (1.0 - math.exp(-k))

# (offset, gain, curvature): reflectance = offset + gain * saturating(a, k)
_S2_RESPONSE = {
    "B01": (0.08, 0.02, 1.0),
    "B02": (0.10, -0.04, 2.0),
    "B03": (0.14, -0.02, 2.0),
    "B04": (0.30, -0.22, 3.0),
    "B05": (0.28, -0.10, 2.0),
    "B06": (0.20, 0.10, 2.0),
    "B07": (0.22, 0.16, 2.5),
    "B08": (0.18, 0.42, 2.5),
    "B8A": (0.20, 0.40, 2.5),
    "B09": (0.12, 0.05, 1.0),
    "B11": (0.35, -0.18, 2.0),
    "B12": (0.30, -0.20, 3.0),
}

NIR_BAND = "B08"
RED_BAND = "B04"

_VV = (-18.0, 9.0, 3.0)    # dB-like backscatter response
_VH = (-26.0, 11.0, 2.2)
_GPP_RESPONSE = (1.0, 11.0, 1.8)

_S2_DATES = [date(2021, 6, 5), date(2021, 6, 19), date(2021, 7, 3),
             date(2021, 7, 17), date(2021, 7, 31), date(2021, 8, 14),
             date(2021, 8, 28)]
_S1_DATES = _S2_DATES
# two shoulder-season acquisitions bracket the summer window
_GPP_DATES = [date(2021, 5, 20), date(2021, 6, 15), date(2021, 7, 15),
              date(2021, 8, 14), date(2021, 9, 13)]
_GPP_SEASON = {date(2021, 5, 20): 0.5, date(2021, 9, 13): 0.5}


def _agb_fraction(agb: np.ndarray, params: SceneParams) -> np.ndarray:
    lo, hi = params.agb_range
    if hi <= lo:
        return np.zeros_like(agb)
    return np.clip((agb - lo) / (hi - lo), 0.0, 1.0)


def generate_scene(params: SceneParams) -> SyntheticScene:
    """Deterministic synthetic landscape: truth raster plus per-modality series."""
    lo, hi = params.agb_range
    grid = target_grid(params)
    extent = params.size * params.pixel_size

    field = _BumpField(_rng(params, _FIELD), extent, n_bumps=max(8, params.size // 16))
    raw = field.sample(grid)
    rmin, rmax = raw.min(), raw.max()

    def agb_on(g: Grid) -> np.ndarray:
        if hi <= lo or rmax <= rmin:
            return np.full(g.shape, lo)
        vals = (field.sample(g) - rmin) / (rmax - rmin)
        return np.clip(vals, 0.0, 1.0) * (hi - lo) + lo

    true_agb = Raster(grid, (AGB_CHANNEL,), agb_on(grid))

    # --- optical series with clouds -------------------------------------
    a2 = _agb_fraction(true_agb.data[:, :, 0], params)
    base_bands = np.stack(
        [off + gain * _saturating(a2, k) for off, gain, k in
         (_S2_RESPONSE[b] for b in S2_BANDS)], axis=2)
    rng_s2 = _rng(params, _S2)
    rng_cloud = _rng(params, _CLOUD)
    s2_scenes, scl_scenes = [], []
    n_t = params.n_timestamps
    for t in range(n_t):
        cloudy = _cloud_deck(rng_cloud, grid.shape, params.cloud_fraction)
        vals = base_bands + rng_s2.normal(0.0, params.s2_noise, size=base_bands.shape) \
            if params.s2_noise > 0 else base_bands.copy()
        bright = 0.65 + 0.15 * rng_cloud.random(grid.shape)
        vals = np.where(cloudy[:, :, None], bright[:, :, None], vals)
        s2_scenes.append(Raster(grid, S2_CHANNELS, vals))
        scl = np.where(cloudy, 9.0, 4.0)
        scl_scenes.append(Raster(grid, (SCL_CHANNEL,), scl))
    s2 = SceneSeries(s2_scenes, _S2_DATES[:n_t], scl_scenes)

    # --- radar series on its native finer grid --------------------------
    g1 = _s1_grid(params)
    a1 = _agb_fraction(agb_on(g1), params)
    rng_s1 = _rng(params, _S1)
    s1_scenes = []
    for t in range(n_t):
        vv = _VV[0] + _VV[1] * _saturating(a1, _VV[2])
        vh = _VH[0] + _VH[1] * _saturating(a1, _VH[2])
        vals = np.stack([vv, vh], axis=2)
        if params.s1_noise > 0:
            vals = vals + rng_s1.normal(0.0, params.s1_noise, size=vals.shape)
        s1_scenes.append(Raster(g1, S1_CHANNELS, vals))
    s1 = SceneSeries(s1_scenes, _S1_DATES[:n_t], None)

    # --- photosynthesis series on its coarse grid -----------------------
    gg = _gpp_grid(params)
    rng_gpp = _rng(params, _GPP)
    if params.gpp_informative:
        ag = _agb_fraction(agb_on(gg), params)
        gpp_base = _GPP_RESPONSE[0] + _GPP_RESPONSE[1] * _saturating(ag, _GPP_RESPONSE[2])
    else:
        # pure noise, carrying no biomass signal at all
        gpp_base = 6.0 + 2.0 * rng_gpp.normal(0.0, 1.0, size=gg.shape)
    sif_scenes = []
    for stamp in _GPP_DATES:
        season = _GPP_SEASON.get(stamp, 1.0)
        vals = season * gpp_base
        if params.gpp_noise > 0:
            vals = vals + rng_gpp.normal(0.0, params.gpp_noise, size=gg.shape)
        sif_scenes.append(Raster(gg, (GPP_CHANNEL,), vals[:, :, None]))
    sif = SceneSeries(sif_scenes, list(_GPP_DATES), None)

    return SyntheticScene(params, true_agb, s2, s1, sif)


def _cloud_deck(rng: np.random.Generator, shape: tuple[int, int], fraction: float) -> np.ndarray:
    """Smooth random deck covering ~fraction of pixels; new draw per scene."""
    if fraction <= 0:
        rng.normal(size=shape)  # keep the stream position deterministic
        return np.zeros(shape, dtype=bool)
    if fraction >= 1:
        rng.normal(size=shape)
        return np.ones(shape, dtype=bool)
    noise = gaussian_filter(rng.normal(size=shape), sigma=max(2.0, shape[0] / 32))
    cut = np.quantile(noise, 1.0 - fraction)
    return noise > cut


def sample_footprints(true_agb: Raster, params: SceneParams) -> FootprintSet:
    """Sparse measurements along parallel tracks, thinned to the target density."""
    if params.footprint_density <= 0:
        raise ValueError("footprint_density must be > 0")
    rng = _rng(params, _TRACKS)
    g = true_agb.grid
    col0 = int(rng.integers(0, params.across_track_step))
    row0 = int(rng.integers(0, params.along_track_step))
    cols = np.arange(col0, g.width, params.across_track_step)
    rows = np.arange(row0, g.height, params.along_track_step)
    cand_cols, cand_rows = np.meshgrid(cols, rows)
    cand_cols = cand_cols.ravel()
    cand_rows = cand_rows.ravel()

    target_count = params.footprint_density / 1000.0 * g.width * g.height
    p_keep = min(1.0, target_count / max(len(cand_cols), 1))
    keep = rng.random(len(cand_cols)) < p_keep
    cand_cols, cand_rows = cand_cols[keep], cand_rows[keep]

    jitter_x = rng.uniform(-0.3, 0.3, size=len(cand_cols))
    jitter_y = rng.uniform(-0.3, 0.3, size=len(cand_cols))
    xs, ys = pixel_to_world(g, cand_cols + jitter_x, cand_rows + jitter_y)
    noise = rng.normal(0.0, params.footprint_noise, size=len(cand_cols)) \
        if params.footprint_noise > 0 else np.zeros(len(cand_cols))
    fps = []
    for x, y, r, c, eps in zip(xs, ys, cand_rows, cand_cols, noise):
        value = max(0.0, float(true_agb.data[r, c, 0]) + float(eps))
        track = (c - col0) // params.across_track_step
        fps.append(Footprint(float(x), float(y), value, True, f"track{track}"))
    return FootprintSet(fps, g.crs_id)


# --- synthetic wildfire ---------------------------------------------------

@dataclass
class BurnScene:
    """Before/after biomass plus post-fire optical bands for burn-ratio work."""

    before_agb: Raster
    after_agb: Raster
    b08_before: Raster
    b12_before: Raster
    b08_after: Raster
    b12_after: Raster
    loss_fraction: np.ndarray
    true_loss_mg_c: float


def burn_scene(params: SceneParams, peak_loss: float = 0.85,
               radius_fraction: float = 0.38,
               agb_map_noise: float = 2.0) -> BurnScene:
    """Disk-shaped burn: biomass loss co-located with a burn-ratio drop.

    The severity profile is a plateau with a smooth rim so most of the disk
    burns hard; post-fire bands lose near-infrared and gain shortwave-infrared
    reflectance in proportion to the local loss.
    """
    scene = generate_scene(params)
    g = scene.grid
    rng = _rng(params, _BURN)
    before = scene.true_agb.data[:, :, 0]

    rr, cc = np.mgrid[0:g.height, 0:g.width]
    cy = g.height * rng.uniform(0.35, 0.65)
    cx = g.width * rng.uniform(0.35, 0.65)
    radius = radius_fraction * g.height
    d = np.hypot(rr - cy, cc - cx)
    core = 0.75 * radius
    rim = peak_loss * np.exp(-(((d - core) / (0.2 * radius)) ** 2))
    loss_frac = np.where(d <= core, peak_loss, np.where(d <= radius, rim, 0.0))

    after = before * (1.0 - loss_frac)
    true_loss = float((before - after).sum()) * 0.09  # 30 m cell = 0.09 ha

    a = _agb_fraction(before, params)  # pre-burn vegetation state
    off8, gain8, k8 = _S2_RESPONSE["B08"]
    off12, gain12, k12 = _S2_RESPONSE["B12"]
    b08_pre = off8 + gain8 * _saturating(a, k8)
    b12_pre = off12 + gain12 * _saturating(a, k12)
    b08_post = b08_pre * (1.0 - 0.85 * loss_frac)
    b12_post = np.clip(b12_pre + 0.4 * loss_frac, 0.0, 1.0)

    def _noisy(vals, sd):
        return vals + rng.normal(0.0, sd, size=vals.shape) if sd > 0 else vals.copy()

    ch8, ch12 = _B08, _B12
    return BurnScene(
        before_agb=Raster(g, (AGB_CHANNEL,), np.maximum(_noisy(before, agb_map_noise), 0.0)),
        after_agb=Raster(g, (AGB_CHANNEL,), np.maximum(_noisy(after, agb_map_noise), 0.0)),
        b08_before=Raster(g, (ch8,), np.clip(_noisy(b08_pre, params.s2_noise), 0.0, 1.0)),
        b12_before=Raster(g, (ch12,), np.clip(_noisy(b12_pre, params.s2_noise), 0.0, 1.0)),
        b08_after=Raster(g, (ch8,), np.clip(_noisy(b08_post, params.s2_noise), 0.0, 1.0)),
        b12_after=Raster(g, (ch12,), np.clip(_noisy(b12_post, params.s2_noise), 0.0, 1.0)),
        loss_fraction=loss_frac,
        true_loss_mg_c=true_loss,
    )


def save_scene(scene: SyntheticScene, out_dir: str | Path) -> None:
    """Write truth, per-modality series + manifests, and footprints to a directory."""
    from .geotiff import write_raster

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_raster(out / "true_agb.tif", scene.true_agb)

    entries = []
    for i, (sc, ts) in enumerate(zip(scene.s2.scenes, scene.s2.timestamps)):
        write_raster(out / f"s2_t{i:02d}.tif", sc)
        write_raster(out / f"scl_t{i:02d}.tif", scene.s2.scl[i])
        entries.append((f"s2_t{i:02d}.tif", ts, f"scl_t{i:02d}.tif"))
    write_manifest(out / "manifest_s2.txt", entries)

    entries = []
    for i, (sc, ts) in enumerate(zip(scene.s1.scenes, scene.s1.timestamps)):
        write_raster(out / f"s1_t{i:02d}.tif", sc)
        entries.append((f"s1_t{i:02d}.tif", ts, None))
    write_manifest(out / "manifest_s1.txt", entries)

    entries = []
    for i, (sc, ts) in enumerate(zip(scene.sif.scenes, scene.sif.timestamps)):
        write_raster(out / f"gpp_t{i:02d}.tif", sc)
        entries.append((f"gpp_t{i:02d}.tif", ts, None))
    write_manifest(out / "manifest_sif.txt", entries)

    fps = sample_footprints(scene.true_agb, scene.params)
    write_footprints_csv(out / "footprints.csv", fps)
