"""Great-circle distances and nearest-facility ranking on a spherical earth.

Pure functions over immutable inputs; safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import EmptyFleetError, ValidationError

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in decimal degrees."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not (math.isfinite(self.lat_deg) and math.isfinite(self.lon_deg)):
            raise ValidationError("coordinates must be finite numbers")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValidationError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise ValidationError(f"longitude {self.lon_deg} outside [-180, 180]")


def deg_to_rad(angle_deg: float) -> float:
    """Convert decimal degrees to radians."""
    if not math.isfinite(angle_deg):
        raise ValidationError(f"angle must be finite, got {angle_deg!r}")
    return angle_deg * math.pi / 180.0


def haversine_km(p1: GeoPoint, p2: GeoPoint, radius_km: float = EARTH_RADIUS_KM) -> float:
    """Great-circle distance in kilometers between two points.

    Uses the haversine formula in its atan2 form, which stays well
    conditioned for antipodal points. Differences are taken in degrees
    before conversion so identical inputs cancel exactly.
    """
    _check_radius(radius_km)
    lat1 = deg_to_rad(p1.lat_deg)
    lat2 = deg_to_rad(p2.lat_deg)
    dlat = deg_to_rad(p2.lat_deg - p1.lat_deg)
    dlon = deg_to_rad(p2.lon_deg - p1.lon_deg)
    a = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    # rounding can nudge a marginally outside [0, 1] near antipodes
    a = min(1.0, max(0.0, a))
    c = 2.0 * math.atan2(math.sqrt(a), math.sqrt(1.0 - a))
    return radius_km * c


def rank_by_distance(
    origin: GeoPoint,
    fleet: Iterable[tuple[str, GeoPoint]],
    radius_km: float = EARTH_RADIUS_KM,
) -> list[tuple[str, float]]:
    """Rank facilities by ascending great-circle distance from origin.

    Ties are broken by ascending facility id so the ordering is
    deterministic. The head of the result is the nearest facility.
    """
    entries = list(fleet)
    if not entries:
        raise EmptyFleetError("cannot rank an empty fleet")
    ranked = [(fid, haversine_km(origin, loc, radius_km)) for fid, loc in entries]
    ranked.sort(key=lambda item: (item[1], item[0]))
    return ranked


def _check_radius(radius_km: float) -> None:
    if not math.isfinite(radius_km) or radius_km <= 0:
        raise ValidationError(f"radius must be a positive finite number, got {radius_km!r}")
