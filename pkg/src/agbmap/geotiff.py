"""GeoTIFF read/write built on tifffile.

Files carry the standard GeoTIFF georeferencing tags (ModelPixelScale,
ModelTiepoint), the GDAL nodata tag, and per-band channel names inside a
GDAL-style metadata tag, so rasters interoperate with common GIS tooling for
the subset of the format this package needs (opaque CRS identifier,
rectilinear north-up grids, no reprojection).
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import tifffile

from .raster import ChannelId, Grid, Raster

NODATA = -9999.0

_TAG_PIXEL_SCALE = 33550
_TAG_TIEPOINT = 33922
_TAG_GDAL_METADATA = 42112
_TAG_GDAL_NODATA = 42113


def _gdal_metadata_xml(channels, crs_id: str, y_down: bool, extra: dict | None) -> str:
    root = ET.Element("GDALMetadata")
    for i, ch in enumerate(channels):
        item = ET.SubElement(root, "Item", name="DESCRIPTION", sample=str(i), role="description")
        item.text = str(ch)
    crs = ET.SubElement(root, "Item", name="CRS_ID")
    crs.text = crs_id
    ydir = ET.SubElement(root, "Item", name="Y_DOWN")
    ydir.text = "1" if y_down else "0"
    if extra:
        item = ET.SubElement(root, "Item", name="AGBMAP_META")
        item.text = json.dumps(extra, sort_keys=True)
    return ET.tostring(root, encoding="unicode")


def write_bands(path: str | Path, grid: Grid, channels, data: np.ndarray,
                metadata: dict | None = None) -> None:
    """Write (H, W, C) data as a multi-band GeoTIFF; NaN becomes the nodata code."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    out = np.where(np.isfinite(data), data, NODATA)
    planar = np.ascontiguousarray(np.moveaxis(out, 2, 0))
    sy = grid.pixel_size_y if grid.y_down else -grid.pixel_size_y
    extratags = [
        (_TAG_PIXEL_SCALE, "d", 3, (grid.pixel_size_x, sy, 0.0)),
        (_TAG_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, grid.origin_x, grid.origin_y, 0.0)),
        (_TAG_GDAL_NODATA, "s", 0, str(NODATA)),
        (_TAG_GDAL_METADATA, "s", 0,
         _gdal_metadata_xml(channels, grid.crs_id, grid.y_down, metadata)),
    ]
    tifffile.imwrite(path, planar, photometric="minisblack", extratags=extratags)


def read_bands(path: str | Path) -> tuple[Grid, tuple[ChannelId, ...], np.ndarray, dict]:
    """Read a multi-band GeoTIFF; nodata pixels come back as NaN per band."""
    with tifffile.TiffFile(path) as tif:
        page = tif.pages[0]
        arr = tif.asarray()
        tags = page.tags
        scale = tags[_TAG_PIXEL_SCALE].value
        tiepoint = tags[_TAG_TIEPOINT].value
        nodata = float(tags[_TAG_GDAL_NODATA].value) if _TAG_GDAL_NODATA in tags else NODATA
        meta_xml = tags[_TAG_GDAL_METADATA].value if _TAG_GDAL_METADATA in tags else None

    if arr.ndim == 2:
        arr = arr[None, :, :]
    n_bands = arr.shape[0]
    channels = [ChannelId("TARGET", f"band{i}") for i in range(n_bands)]
    crs_id = "local"
    sy = float(scale[1])
    y_down = sy > 0  # positive GeoTIFF ScaleY means north-up rows
    extra: dict = {}
    if meta_xml:
        root = ET.fromstring(meta_xml)
        for item in root.iter("Item"):
            name = item.get("name")
            if name == "DESCRIPTION" and item.get("sample") is not None:
                channels[int(item.get("sample"))] = ChannelId.parse(item.text or "")
            elif name == "CRS_ID":
                crs_id = item.text or "local"
            elif name == "Y_DOWN":
                y_down = item.text != "0"
            elif name == "AGBMAP_META":
                extra = json.loads(item.text or "{}")

    grid = Grid(
        origin_x=float(tiepoint[3]),
        origin_y=float(tiepoint[4]),
        pixel_size_x=float(scale[0]),
        pixel_size_y=abs(sy),
        width=arr.shape[2],
        height=arr.shape[1],
        crs_id=crs_id,
        y_down=y_down,
    )
    data = np.moveaxis(arr.astype(np.float64), 0, 2).copy()
    data[np.isclose(data, nodata, rtol=0, atol=1e-6)] = np.nan
    return grid, tuple(channels), data, extra


def write_raster(path: str | Path, raster: Raster, metadata: dict | None = None) -> None:
    """Write a Raster as a (multi-band) GeoTIFF with nodata and band names."""
    data = raster.data.copy()
    data[~raster.valid_mask] = np.nan
    write_bands(path, raster.grid, raster.channels, data, metadata)


def read_raster(path: str | Path) -> Raster:
    """Read a GeoTIFF written by write_raster (or a compatible subset)."""
    grid, channels, data, _ = read_bands(path)
    mask = np.isfinite(data).all(axis=2)
    return Raster(grid, channels, data, mask)


def read_metadata(path: str | Path) -> dict:
    """Extra JSON metadata stored alongside band names, if any."""
    _, _, _, extra = read_bands(path)
    return extra
