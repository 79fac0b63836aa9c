"""Reverse-geocoding plug-in: coordinates to a human-readable address.

The result is advisory only. Providers may fail or return nothing; callers
always get ``None`` in that case and dispatch is never blocked on it.
"""

from __future__ import annotations

import logging

from .geodesy import GeoPoint, haversine_km

logger = logging.getLogger(__name__)


class NullGeocoder:
    """Provider that knows no addresses. The default."""

    def reverse(self, loc: GeoPoint) -> str | None:
        return None


class TableGeocoder:
    """Table-driven provider for tests and demos.

    Returns the address of the nearest known point within ``max_km``.
    """

    def __init__(self, entries: dict[tuple[float, float], str] | None = None,
                 max_km: float = 1.0):
        self._entries = dict(entries or {})
        self.max_km = max_km

    def add(self, loc: GeoPoint, address: str) -> None:
        self._entries[(loc.lat_deg, loc.lon_deg)] = address

    def reverse(self, loc: GeoPoint) -> str | None:
        best = None
        for (lat, lon), address in self._entries.items():
            d = haversine_km(loc, GeoPoint(lat, lon))
            if d <= self.max_km and (best is None or d < best[0]):
                best = (d, address)
        return best[1] if best else None


def reverse_geocode(provider, loc: GeoPoint) -> str | None:
    """Ask ``provider`` for an address; any failure degrades to None."""
    if provider is None:
        return None
    try:
        return provider.reverse(loc)
    except Exception:
        logger.warning("reverse geocode failed for (%s, %s)",
                       loc.lat_deg, loc.lon_deg, exc_info=True)
        return None


def build_geocoder(selector: str):
    """``null`` or ``table`` (empty table; tests populate via .add())."""
    if selector == "null":
        return NullGeocoder()
    if selector == "table":
        return TableGeocoder()
    raise ValueError(f"unknown geocoder {selector!r}")
