from __future__ import annotations

import numpy as np
import pytest

from agbmap.raster import ChannelId, Grid, Raster


@pytest.fixture
def grid10():
    """10x10 grid of 30 m pixels anchored at (0, 0), north-up."""
    return Grid(origin_x=0.0, origin_y=0.0, pixel_size_x=30.0, pixel_size_y=30.0,
                width=10, height=10, crs_id="utm")


def make_raster(grid: Grid, values: np.ndarray, mask: np.ndarray | None = None,
                channel: ChannelId | None = None) -> Raster:
    ch = channel or ChannelId("S2", "B08")
    return Raster(grid, (ch,), np.asarray(values, dtype=float), mask)
