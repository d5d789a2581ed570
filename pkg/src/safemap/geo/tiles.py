"""Static-map tile request construction and cache layout.

No network calls happen anywhere in this module; it only builds URLs and
the on-disk cache paths a fetcher would fill.
"""

from __future__ import annotations

import os
from typing import Mapping, Optional

from .grid import Cell

KEY_ENV_VAR = "STATIC_MAPS_KEY"
BASE_URL = "https://maps.googleapis.com/maps/api/staticmap"


class MissingKeyError(Exception):
    """Tile API key not available in the environment."""


def tile_url(cell: Cell, zoom: int = 19, size_px: int = 400,
             key_source: Optional[Mapping[str, str]] = None) -> str:
    """Deterministic satellite-tile request URL centered on the cell.

    The key comes from ``key_source`` (default: process environment) under
    ``STATIC_MAPS_KEY``.  Coordinates are fixed to 6 decimal places so equal
    cells always produce identical strings.
    """
    if not 0 <= zoom <= 22:
        raise ValueError(f"zoom {zoom} outside the service range 0..22")
    if size_px < 1:
        raise ValueError(f"size_px must be positive, got {size_px}")
    env = key_source if key_source is not None else os.environ
    key = env.get(KEY_ENV_VAR)
    if not key:
        raise MissingKeyError(
            f"no tile API key found; set the {KEY_ENV_VAR} environment variable")
    center = f"{cell.center_lat:.6f},{cell.center_lon:.6f}"
    return (f"{BASE_URL}?center={center}&zoom={zoom}"
            f"&size={size_px}x{size_px}&maptype=satellite&key={key}")


def tile_cache_path(cell: Cell, zoom: int = 19, size_px: int = 400) -> str:
    """Relative cache location a fetcher would write the tile image to."""
    return f"tiles/z{zoom}_s{size_px}/c{cell.col}_r{cell.row}.ppm"
