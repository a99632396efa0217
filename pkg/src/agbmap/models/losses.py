"""Masked root-mean-squared error.

Supervision is sparse, so the loss runs over labeled pixels only: unlabeled
pixels contribute exactly zero to both the value and the gradient. The torch
variant routes unlabeled residuals through a constant-zero branch of
``torch.where`` so their gradient is machine-zero, and NaN sentinels in the
target never touch arithmetic.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import EmptyMask, ShapeMismatch


def masked_rmse(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> float:
    """sqrt(mean of squared error over mask=True pixels)."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != target.shape or pred.shape != mask.shape:
        raise ShapeMismatch(f"shapes differ: {pred.shape}, {target.shape}, {mask.shape}")
    n = int(mask.sum())
    if n == 0:
        raise EmptyMask("mask selects no pixels")
    diff = np.where(mask, pred - target, 0.0)
    return float(np.sqrt(np.sum(diff * diff) / n))


def masked_rmse_torch(pred: torch.Tensor, target: torch.Tensor,
                      mask: torch.Tensor) -> torch.Tensor:
    """Differentiable masked RMSE; zero gradient at mask=False pixels."""
    if pred.shape != target.shape or pred.shape != mask.shape:
        raise ShapeMismatch(f"shapes differ: {tuple(pred.shape)}, "
                            f"{tuple(target.shape)}, {tuple(mask.shape)}")
    n = mask.sum()
    if n.item() == 0:
        raise EmptyMask("mask selects no pixels")
    zero = torch.zeros((), dtype=pred.dtype, device=pred.device)
    diff = torch.where(mask, pred - target, zero)
    return torch.sqrt((diff * diff).sum() / n)
