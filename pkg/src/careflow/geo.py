"""Coordinates, road-corrected distances, distance matrices, geocoding.

All distances are in statute miles.  Road distances are estimated as
great-circle (haversine) distance times a uniform correction coefficient;
the default coefficient of 1.285 approximates the road/straight-line ratio
for the service region.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)

EARTH_RADIUS_MILES = 3958.8
DEFAULT_ROAD_COEFF = 1.285

# One degree of latitude in miles on the sphere used by haversine_miles.
MILES_PER_DEGREE = EARTH_RADIUS_MILES * math.pi / 180.0

_ZIP_RE = re.compile(r"\b(\d{5})(?:-\d{4})?\b")


class UnresolvableAddress(Exception):
    """Address could not be geocoded and its zip is not in the centroid table."""


class CoordinateSource(str, Enum):
    EXACT = "exact"
    ZIP_CENTER_FALLBACK = "zip_center_fallback"


@dataclass(frozen=True)
class GeoPoint:
    """A validated WGS84 coordinate pair."""

    latitude: float
    longitude: float
    source: CoordinateSource = CoordinateSource.EXACT

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")


def haversine_miles(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in miles."""
    phi1 = math.radians(a.latitude)
    phi2 = math.radians(b.latitude)
    dphi = math.radians(b.latitude - a.latitude)
    dlam = math.radians(b.longitude - a.longitude)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * math.asin(math.sqrt(min(1.0, h)))


def corrected_distance(a: GeoPoint, b: GeoPoint, coeff: float = DEFAULT_ROAD_COEFF) -> float:
    """Road-distance estimate: haversine miles scaled by ``coeff``."""
    if coeff <= 0:
        raise ValueError(f"correction coefficient must be positive, got {coeff}")
    return coeff * haversine_miles(a, b)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric zero-diagonal matrix of corrected miles between labeled nodes."""

    labels: tuple[str, ...]
    values: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        n = len(self.labels)
        if len(set(self.labels)) != n:
            raise ValueError("duplicate labels in distance matrix")
        if values.shape != (n, n):
            raise ValueError(f"matrix shape {values.shape} does not match {n} labels")
        if n and np.any(values < 0):
            raise ValueError("negative distances")
        if n and np.max(np.abs(values - values.T)) > 1e-9:
            raise ValueError("distance matrix is not symmetric")
        if n and np.max(np.abs(np.diag(values))) > 0:
            raise ValueError("distance matrix diagonal is not zero")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(self.labels)})

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        return self._index[label]

    def between(self, a: str, b: str) -> float:
        return float(self.values[self._index[a], self._index[b]])

    def submatrix(self, labels: Sequence[str]) -> "DistanceMatrix":
        idx = [self._index[lab] for lab in labels]
        return DistanceMatrix(tuple(labels), self.values[np.ix_(idx, idx)])


def build_distance_matrix(
    points: Sequence[tuple[str, GeoPoint]], coeff: float = DEFAULT_ROAD_COEFF
) -> DistanceMatrix:
    """Corrected pairwise distances for labeled points, in input order."""
    if not points:
        raise ValueError("at least one point required")
    labels = tuple(label for label, _ in points)
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate labels")
    n = len(points)
    values = np.zeros((n, n))
    # Fill the upper triangle and mirror so symmetry holds bit-for-bit.
    for i in range(n):
        for j in range(i + 1, n):
            d = corrected_distance(points[i][1], points[j][1], coeff)
            values[i, j] = d
            values[j, i] = d
    return DistanceMatrix(labels, values)


class GeocoderBackend(Protocol):
    def resolve(self, address: str) -> tuple[float, float] | None:
        """Return (lat, lon) for an address, or None if not found."""


class FixtureGeocoder:
    """Offline backend reading an address -> [lat, lon] map from a JSON file.

    Keeps tests and air-gapped deployments hermetic; the map file path comes
    from the ``geocoder.fixture_path`` config key.
    """

    def __init__(self, mapping: dict[str, tuple[float, float]]):
        self._mapping = {k.strip().lower(): tuple(v) for k, v in mapping.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureGeocoder":
        with open(path) as fh:
            return cls(json.load(fh))

    def resolve(self, address: str) -> tuple[float, float] | None:
        hit = self._mapping.get(address.strip().lower())
        return (float(hit[0]), float(hit[1])) if hit else None


class CensusGeocoder:
    """Live backend against the US Census one-line-address geocoder."""

    URL = "https://geocoding.geo.census.gov/geocoder/locations/onelineaddress"

    def __init__(self, timeout: float = 15.0):
        self.timeout = timeout

    def resolve(self, address: str) -> tuple[float, float] | None:
        import httpx

        try:
            resp = httpx.get(
                self.URL,
                params={"address": address, "benchmark": "Public_AR_Current", "format": "json"},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            matches = resp.json().get("result", {}).get("addressMatches", [])
        except Exception as exc:
            log.warning("geocoder request failed for %r: %s", address, exc)
            return None
        if not matches:
            return None
        coords = matches[0]["coordinates"]
        return float(coords["y"]), float(coords["x"])


class ZipCentroidTable:
    """zip -> centroid lookup backed by a ``zip,lat,lon`` CSV."""

    def __init__(self, centroids: dict[str, tuple[float, float]]):
        self._centroids = centroids

    @classmethod
    def from_csv(cls, path: str | Path) -> "ZipCentroidTable":
        centroids: dict[str, tuple[float, float]] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                centroids[row["zip"].strip()] = (float(row["lat"]), float(row["lon"]))
        return cls(centroids)

    @classmethod
    def bundled(cls) -> "ZipCentroidTable":
        return cls.from_csv(Path(__file__).parent / "data" / "zip_centroids.csv")

    def lookup(self, zip5: str) -> tuple[float, float] | None:
        return self._centroids.get(zip5)


def geocode_address(
    address: str,
    backend: GeocoderBackend,
    zip_table: ZipCentroidTable | None = None,
) -> GeoPoint:
    """Resolve an address to a point, falling back to its zip-code centroid.

    Raises UnresolvableAddress when the backend has no match and the zip is
    absent from the centroid table.
    """
    if not address or not address.strip():
        raise ValueError("empty address")
    hit = backend.resolve(address)
    if hit is not None:
        return GeoPoint(hit[0], hit[1], CoordinateSource.EXACT)
    zip_table = zip_table if zip_table is not None else ZipCentroidTable.bundled()
    m = _ZIP_RE.search(address)
    if m:
        centroid = zip_table.lookup(m.group(1))
        if centroid is not None:
            return GeoPoint(centroid[0], centroid[1], CoordinateSource.ZIP_CENTER_FALLBACK)
    raise UnresolvableAddress(address)
