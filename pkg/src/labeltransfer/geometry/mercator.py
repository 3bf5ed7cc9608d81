"""Geographic to local-Euclidean conversion via a scaled Mercator projection.

Scale follows the KITTI devkit convention: s = cos(latitude of the dataset
origin), with the WGS-84 equatorial radius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import PoleSingularity

EARTH_RADIUS_M = 6378137.0
MAX_ABS_LATITUDE_DEG = 89.9


@dataclass(frozen=True)
class GeoCoordinate:
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if abs(self.latitude) > 90.0:
            raise ValueError("|latitude| must be <= 90 degrees")
        if abs(self.longitude) > 180.0:
            raise ValueError("|longitude| must be <= 180 degrees")


def _check_lat(g: GeoCoordinate):
    if abs(g.latitude) > MAX_ABS_LATITUDE_DEG:
        raise PoleSingularity(f"latitude {g.latitude} deg too close to a pole")


def _mercator_xy(g: GeoCoordinate, scale: float):
    lat = math.radians(g.latitude)
    lon = math.radians(g.longitude)
    x = scale * EARTH_RADIUS_M * lon
    y = scale * EARTH_RADIUS_M * math.log(math.tan(math.pi / 4 + lat / 2))
    return x, y


def geo_to_local(g: GeoCoordinate, origin: GeoCoordinate) -> np.ndarray:
    """Local metric coordinates; the origin maps to (0, 0, origin.altitude)."""
    _check_lat(g)
    _check_lat(origin)
    scale = math.cos(math.radians(origin.latitude))
    x, y = _mercator_xy(g, scale)
    x0, y0 = _mercator_xy(origin, scale)
    return np.array([x - x0, y - y0, g.altitude])


def local_to_geo(xyz, origin: GeoCoordinate) -> GeoCoordinate:
    """Inverse of geo_to_local (same origin)."""
    _check_lat(origin)
    scale = math.cos(math.radians(origin.latitude))
    x0, y0 = _mercator_xy(origin, scale)
    x, y, z = np.asarray(xyz, dtype=np.float64)
    lon = math.degrees((x + x0) / (scale * EARTH_RADIUS_M))
    lat = math.degrees(2 * math.atan(math.exp((y + y0) / (scale * EARTH_RADIUS_M))) - math.pi / 2)
    return GeoCoordinate(lat, lon, float(z))
