"""Pixel-table extraction and dense (wall-to-wall) map prediction."""

from __future__ import annotations

import numpy as np
import torch

from ..cube import Datacube
from ..errors import ModalityMismatch, NoSupervisedPixels, StatsMismatch
from ..raster import AGB_CHANNEL, Raster, tile_windows
from .artifacts import ModelArtifact
from .unet import MaskedUNet

# tiled inference overlaps neighbors by this many pixels and averages
INFERENCE_OVERLAP = 64


def extract_pixel_table(cube: Datacube) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One (features, target) row per supervised, input-valid pixel.

    Returns (X, y, flat_indices); rows scan the raster row-major so the
    extraction order is deterministic.
    """
    sup = cube.supervised_mask
    if not sup.any():
        raise NoSupervisedPixels("cube has no supervised, input-valid pixels")
    idx = np.flatnonzero(sup)
    rows, cols = np.unravel_index(idx, cube.grid.shape)
    X = cube.inputs.data[rows, cols, :]
    y = cube.target.data[rows, cols, 0]
    return X, y, idx


def _check_compat(artifact: ModelArtifact, cube: Datacube) -> None:
    if artifact.modality_subset != cube.modality_subset:
        raise ModalityMismatch(
            f"artifact is {artifact.modality_subset!r}, cube is {cube.modality_subset!r}")
    if cube.norm_stats is None:
        raise StatsMismatch("cube is not normalized; normalize with the artifact's stats")
    got = np.asarray(cube.norm_stats, dtype=float)
    want = np.asarray(artifact.norm_stats, dtype=float)
    if got.shape != want.shape or not np.allclose(got, want, rtol=0, atol=1e-9):
        raise StatsMismatch("cube normalization stats differ from the artifact's")


def predict_dense(artifact: ModelArtifact, cube: Datacube,
                  tile_size: int | None = None) -> Raster:
    """Predict at every input-valid pixel; invalid inputs stay invalid."""
    _check_compat(artifact, cube)
    valid = cube.inputs.valid_mask
    out = np.full(cube.grid.shape, np.nan)

    if artifact.kind == "unet":
        out = _predict_unet(artifact.model, cube, tile_size)
    else:
        idx = np.flatnonzero(valid)
        rows, cols = np.unravel_index(idx, cube.grid.shape)
        X = cube.inputs.data[rows, cols, :]
        out[rows, cols] = artifact.model.predict(X)
    out[~valid] = np.nan
    return Raster(cube.grid, (AGB_CHANNEL,), out, valid & np.isfinite(out))


def _pick_tile_size(h: int, w: int, divisor: int) -> int:
    side = max(h, w)
    rounded = -(-side // divisor) * divisor  # round up to the divisor
    return max(min(rounded, 256), divisor)


def _predict_unet(model: MaskedUNet, cube: Datacube, tile_size: int | None) -> np.ndarray:
    divisor = model.config.divisor
    h, w = cube.grid.shape
    if tile_size is None:
        tile_size = _pick_tile_size(h, w, divisor)
    if tile_size % divisor:
        raise ValueError(f"tile_size must be divisible by {divisor}")
    # overlap-averaged stitching; tiles at or below the overlap abut instead
    stride = tile_size - INFERENCE_OVERLAP if tile_size > INFERENCE_OVERLAP else tile_size

    # mean-fill invalid inputs (zero in normalized space) before convolution
    data = np.where(cube.inputs.valid_mask[:, :, None], cube.inputs.data, 0.0)

    total = np.zeros((h, w))
    weight = np.zeros((h, w))
    model.eval()
    with torch.no_grad():
        for win in tile_windows(h, w, tile_size, stride):
            in_h = min(win.height, h - win.row0)
            in_w = min(win.width, w - win.col0)
            patch = _reflect_patch(data, win.row0, win.col0, in_h, in_w, tile_size)
            x = torch.from_numpy(np.moveaxis(patch, 2, 0)[None]).float()
            pred = model(x)[0, 0].numpy()
            total[win.row0:win.row0 + in_h, win.col0:win.col0 + in_w] += pred[:in_h, :in_w]
            weight[win.row0:win.row0 + in_h, win.col0:win.col0 + in_w] += 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        return total / weight


def _reflect_patch(data: np.ndarray, r0: int, c0: int, in_h: int, in_w: int,
                   size: int) -> np.ndarray:
    patch = data[r0:r0 + in_h, c0:c0 + in_w, :]
    while patch.shape[0] < size or patch.shape[1] < size:
        pad_y = min(patch.shape[0], size - patch.shape[0])
        pad_x = min(patch.shape[1], size - patch.shape[1])
        patch = np.pad(patch, [(0, pad_y), (0, pad_x), (0, 0)], mode="symmetric")
    return patch
