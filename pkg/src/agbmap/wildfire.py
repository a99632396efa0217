"""Post-fire impact assessment: biomass change, burn ratio, and their agreement.

The burn ratio contrasts near-infrared against shortwave-infrared reflectance:
(B08 - B12) / (B08 + B12). Lower values indicate burned surfaces, so biomass
loss (negative change) should track low post-fire ratio values; the report
quantifies that with a Pearson correlation and aggregates total carbon loss
at 0.09 ha per 30 m cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatch, InsufficientOverlap
from .raster import ChannelId, Raster

CELL_AREA_HA = 0.09  # one 30 m x 30 m cell

NBR_CHANNEL = ChannelId("S2", "NBR")
DELTA_CHANNEL = ChannelId("TARGET", "DELTA_AGB")

NBR_INTERPRETATION = "lower NBR value suggests a burned area"


def nbr(b08: Raster, b12: Raster) -> Raster:
    """Normalized burn ratio (B08 - B12) / (B08 + B12), in [-1, 1]."""
    if not b08.grid.same_geometry(b12.grid):
        raise GridMismatch("B08 and B12 must share one grid")
    a = b08.data[:, :, 0]
    b = b12.data[:, :, 0]
    joint = b08.valid_mask & b12.valid_mask
    if np.any(a[joint] < 0) or np.any(b[joint] < 0):
        raise ValueError("reflectance values must be >= 0")
    denom = a + b
    valid = joint & (denom >= 1e-9)
    out = np.full(a.shape, np.nan)
    out[valid] = (a[valid] - b[valid]) / denom[valid]
    return Raster(b08.grid, (NBR_CHANNEL,), out, valid)


def dnbr(b08_before: Raster, b12_before: Raster,
         b08_after: Raster, b12_after: Raster) -> Raster:
    """Pre-fire minus post-fire burn ratio; higher values mean more severe burn."""
    pre = nbr(b08_before, b12_before)
    post = nbr(b08_after, b12_after)
    valid = pre.valid_mask & post.valid_mask
    out = np.full(pre.data.shape[:2], np.nan)
    out[valid] = pre.data[valid, 0] - post.data[valid, 0]
    return Raster(pre.grid, (ChannelId("S2", "DNBR"),), out, valid)


def agb_delta(after: Raster, before: Raster) -> Raster:
    """after - before (Mg C/ha) at jointly valid pixels."""
    if not after.grid.same_geometry(before.grid):
        raise GridMismatch("before/after rasters must share one grid")
    valid = after.valid_mask & before.valid_mask
    out = np.full(after.data.shape[:2], np.nan)
    out[valid] = after.data[valid, 0] - before.data[valid, 0]
    return Raster(after.grid, (DELTA_CHANNEL,), out, valid)


@dataclass
class ImpactReport:
    delta_agb: Raster
    nbr: Raster
    total_loss_mg_c: float      # sum of loss magnitudes x cell area
    correlation: float          # Pearson r between delta and burn ratio
    correlation_defined: bool
    n_pixels: int
    nbr_kind: str               # "post" | "dnbr"

    def to_json(self) -> dict:
        return {
            "total_loss_mg_c": self.total_loss_mg_c,
            "correlation": None if not self.correlation_defined else self.correlation,
            "correlation_defined": self.correlation_defined,
            "n_pixels": self.n_pixels,
            "nbr_kind": self.nbr_kind,
            "cell_area_ha": CELL_AREA_HA,
            "nbr_interpretation": NBR_INTERPRETATION,
        }


def impact_report(delta: Raster, burn_ratio: Raster,
                  cell_area_ha: float = CELL_AREA_HA,
                  nbr_kind: str = "post") -> ImpactReport:
    """Aggregate loss and loss/intensity agreement over jointly valid pixels."""
    if not delta.grid.same_geometry(burn_ratio.grid):
        raise GridMismatch("delta and burn-ratio rasters must share one grid")
    joint = delta.valid_mask & burn_ratio.valid_mask
    n = int(joint.sum())
    if n < 2:
        raise InsufficientOverlap(f"only {n} jointly valid pixels")
    d = delta.data[joint, 0]
    r = burn_ratio.data[joint, 0]
    total_loss = float(np.maximum(-d, 0.0).sum() * cell_area_ha)
    defined = bool(d.std() > 1e-12 and r.std() > 1e-12)
    corr = float(np.corrcoef(d, r)[0, 1]) if defined else float("nan")
    return ImpactReport(
        delta_agb=delta,
        nbr=burn_ratio,
        total_loss_mg_c=total_loss,
        correlation=corr,
        correlation_defined=defined,
        n_pixels=n,
        nbr_kind=nbr_kind,
    )


def save_impact_outputs(report: ImpactReport, out_dir: str | Path) -> None:
    """Write delta.tif, nbr.tif, report.json and a side-by-side panel image."""
    from .geotiff import write_raster

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_raster(out / "delta.tif", report.delta_agb)
    write_raster(out / "nbr.tif", report.nbr,
                 metadata={"interpretation": NBR_INTERPRETATION, "kind": report.nbr_kind})
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True))
    panel_figure(report, out / "panel.png")


def panel_figure(report: ImpactReport, path: str | Path) -> None:
    """Two-panel map: biomass change next to the burn ratio."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 5))
    im0 = axes[0].imshow(report.delta_agb.data[:, :, 0], cmap="RdYlGn")
    axes[0].set_title("AGB change (Mg C/ha)")
    fig.colorbar(im0, ax=axes[0], shrink=0.8)
    im1 = axes[1].imshow(report.nbr.data[:, :, 0], cmap="RdYlGn", vmin=-1, vmax=1)
    axes[1].set_title(f"NBR ({report.nbr_kind}); lower = more burned")
    fig.colorbar(im1, ax=axes[1], shrink=0.8)
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
