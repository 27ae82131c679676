"""Great-circle distance and nearest-substation search."""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .core import GeoPoint

EARTH_RADIUS_KM = 6371.0


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km between two points given in degrees."""
    lat_a, lat_b = math.radians(a.lat), math.radians(b.lat)
    dlat = lat_b - lat_a
    dlon = math.radians(b.lon) - math.radians(a.lon)
    h = math.sin(dlat / 2) ** 2 + math.cos(lat_a) * math.cos(lat_b) * math.sin(dlon / 2) ** 2
    # clamp guards rounding overshoot near antipodes
    h = min(max(h, 0.0), 1.0)
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def _location(obj) -> GeoPoint:
    return obj if isinstance(obj, GeoPoint) else obj.location


def _unit_vectors(points: Iterable[GeoPoint]) -> np.ndarray:
    lat = np.radians([p.lat for p in points])
    lon = np.radians([p.lon for p in points])
    return np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


class SubstationIndex:
    """Nearest-substation lookup over a fixed set of locations.

    Candidates come from a k-d tree over unit vectors (chord length is monotone
    in great-circle distance); the winner is then chosen with the exact
    haversine distance and the lexicographically smallest id on ties, so
    results match a brute-force scan.
    """

    _SLACK = 1e-9

    def __init__(self, substations: Iterable):
        items = sorted(((s.id, _location(s)) for s in substations), key=lambda t: t[0])
        self.ids = [i for i, _ in items]
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate substation id in index")
        self.points = [p for _, p in items]
        self._tree = cKDTree(_unit_vectors(self.points)) if items else None

    def __len__(self) -> int:
        return len(self.ids)

    def nearest(self, point: GeoPoint) -> tuple[str, float]:
        if self._tree is None:
            raise ValueError("cannot search an empty substation index")
        q = _unit_vectors([point])[0]
        chord, _ = self._tree.query(q)
        radius = chord * (1 + self._SLACK) + self._SLACK
        best = None
        for i in self._tree.query_ball_point(q, radius):
            key = (haversine_distance(point, self.points[i]), self.ids[i])
            if best is None or key < best:
                best = key
        return best[1], best[0]


def nearest_substation(site, index: SubstationIndex) -> str:
    return index.nearest(_location(site))[0]


def assign_all(sites: Iterable, index: SubstationIndex) -> dict[str, str]:
    """Map every site id to the id of its nearest substation."""
    return {site.id: nearest_substation(site, index) for site in sites}


def assignment_distances(sites: Iterable, substations: Mapping, assignment: Mapping[str, str]) -> dict[str, float]:
    return {s.id: haversine_distance(s.location, substations[assignment[s.id]].location) for s in sites}
