"""Coordinates, great-circle distances and threshold accuracy."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ValidationError

# IUGG mean Earth radius; the closed-form 10007.5434 km and 20015.0868 km arcs
# assume a 6371.0 km sphere
EARTH_RADIUS_KM = 6371.0088
HALF_CIRCUMFERENCE_KM = math.pi * EARTH_RADIUS_KM

DEFAULT_THRESHOLDS = (1.0, 25.0, 200.0, 750.0, 2500.0)
LEVEL_NAMES = {
    1.0: "street",
    25.0: "city",
    200.0: "region",
    750.0: "country",
    2500.0: "continent",
}


@dataclass(frozen=True)
class GeoCoordinate:
    """A point on the sphere in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        lat = as_float("lat", self.lat)
        lon = as_float("lon", self.lon)
        if not -90.0 <= lat <= 90.0:
            raise ValidationError("lat", f"{lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValidationError("lon", f"{lon} outside [-180, 180]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)

    @classmethod
    def from_pair(cls, pair, field="coordinate"):
        """Build from a ``[lat, lon]`` pair as stored on the wire."""
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ValidationError(field, f"expected [lat, lon], got {pair!r}")
        try:
            return cls(pair[0], pair[1])
        except ValidationError as e:
            raise ValidationError(f"{field}.{e.field}", e.message)

    def to_pair(self):
        return [self.lat, self.lon]


def as_float(field, value):
    """Coerce a JSON number to a finite float, naming ``field`` on failure."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(field, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(field, f"must be finite, got {value}")
    return value


@dataclass(frozen=True)
class ThresholdSet:
    """Strictly increasing positive distance thresholds in kilometers."""

    thresholds: tuple = DEFAULT_THRESHOLDS

    def __post_init__(self):
        values = tuple(float(t) for t in self.thresholds)
        if not values:
            raise ValidationError("thresholds", "at least one threshold required")
        for t in values:
            if not math.isfinite(t) or t <= 0:
                raise ValidationError("thresholds", f"{t} is not a positive distance")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValidationError("thresholds", "must be strictly increasing")
        object.__setattr__(self, "thresholds", values)

    def __iter__(self):
        return iter(self.thresholds)

    def __len__(self):
        return len(self.thresholds)

    def labels(self):
        """Column headings: level names for the standard thresholds, else ``<t>km``."""
        return [LEVEL_NAMES.get(t, f"{t:g}km") for t in self.thresholds]


def geodesic_distance(a, b, radius_km=EARTH_RADIUS_KM):
    """Haversine great-circle distance in kilometers on a sphere of the given radius."""
    lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
    lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * (
        math.sin((lon2 - lon1) / 2) ** 2
    )
    # rounding can push h marginally outside [0, 1]
    h = min(1.0, max(0.0, h))
    return 2 * radius_km * math.asin(math.sqrt(h))


def destination_point(origin, bearing_deg, distance_km):
    """Point reached travelling ``distance_km`` from ``origin`` along an initial bearing."""
    if distance_km < 0:
        raise ValidationError("distance_km", "must be non-negative")
    delta = distance_km / EARTH_RADIUS_KM
    theta = math.radians(bearing_deg)
    lat1, lon1 = math.radians(origin.lat), math.radians(origin.lon)

    sin_lat2 = math.sin(lat1) * math.cos(delta) + math.cos(lat1) * math.sin(
        delta
    ) * math.cos(theta)
    lat2 = math.asin(min(1.0, max(-1.0, sin_lat2)))
    lon2 = lon1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(lat1),
        math.cos(delta) - math.sin(lat1) * sin_lat2,
    )
    lon_deg = (math.degrees(lon2) + 540.0) % 360.0 - 180.0
    lat_deg = min(90.0, max(-90.0, math.degrees(lat2)))
    return GeoCoordinate(lat_deg, min(180.0, max(-180.0, lon_deg)))


def within_threshold(d, t):
    """True when ``d`` lies inside the threshold, boundary included."""
    if t <= 0:
        raise ValidationError("threshold", f"must be positive, got {t}")
    return d <= t


def accuracy_at_thresholds(distances, ts=None):
    """
    Percentage of distances at or below each threshold.

    Args:
        distances: Iterable of distances in kilometers
        ts: ThresholdSet, defaults to the five standard levels

    Returns:
        tuple: (list of percentages, one per threshold; unweighted mean of them)
    """
    ts = ts or ThresholdSet()
    d = np.asarray(list(distances), dtype=np.float64)
    if d.size == 0:
        raise DataError("no records")
    counts = (d[:, None] <= np.asarray(ts.thresholds)[None, :]).sum(axis=0)
    percentages = [100.0 * int(c) / d.size for c in counts]
    return percentages, sum(percentages) / len(percentages)
