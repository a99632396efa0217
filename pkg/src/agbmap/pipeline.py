"""End-to-end assembly: scene series -> composites -> matched cube.

Mirrors the data-processing chain: radar gets a temporal median then bilinear
resampling to the 30 m grid; optics get an SCL-gated median composite; the
photosynthesis proxy gets summertime averaging then resampling; footprints are
matched to grid cells; everything stacks into a datacube per modality subset.
"""

from __future__ import annotations

from datetime import date

from .compositing import SUMMER_WINDOW_2021, SceneSeries, median_composite, temporal_mean
from .cube import Datacube, FootprintSet, MatchStats, assemble, match_footprints
from .raster import Grid, Raster, bilinear_resample
from .synth import SyntheticScene, sample_footprints


def composite_inputs(grid: Grid,
                     s2: SceneSeries | None = None,
                     s1: SceneSeries | None = None,
                     sif: SceneSeries | None = None,
                     window: tuple[date, date] = SUMMER_WINDOW_2021) -> dict[str, Raster]:
    """Composite each available modality and bring it onto the target grid."""
    inputs: dict[str, Raster] = {}
    if s2 is not None:
        comp = median_composite(s2)
        inputs["S2"] = comp if comp.grid.same_geometry(grid) else bilinear_resample(comp, grid)
    if s1 is not None:
        comp = median_composite(s1)
        inputs["S1"] = comp if comp.grid.same_geometry(grid) else bilinear_resample(comp, grid)
    if sif is not None:
        comp = temporal_mean(sif, window)
        inputs["SIF"] = comp if comp.grid.same_geometry(grid) else bilinear_resample(comp, grid)
    return inputs


def scene_to_cube(scene: SyntheticScene, subset: str,
                  fps: FootprintSet | None = None,
                  window: tuple[date, date] = SUMMER_WINDOW_2021,
                  ) -> tuple[Datacube, MatchStats]:
    """Full desk-scale pipeline from a synthetic scene to a raw (unnormalized) cube."""
    if fps is None:
        fps = sample_footprints(scene.true_agb, scene.params)
    grid = scene.grid
    inputs = composite_inputs(grid, s2=scene.s2, s1=scene.s1, sif=scene.sif, window=window)
    target, mask, stats = match_footprints(fps, grid)
    cube = assemble(inputs, target, mask, subset)
    return cube, stats
