"""Shared test helpers: independent oracles and random fixture builders.

The oracles here are deliberately written against the raw math (different
formulations than the implementation) so the tests cross-check rather than
mirror the production code.
"""

from __future__ import annotations

import math
import random
from typing import List, Tuple

from geoask.geometry import (
    LINESTRING,
    MULTIPOLYGON,
    POINT,
    POLYGON,
    BoundingBox,
    Geometry,
)
from geoask.keys import EntityKey, GeoSet

EARTH_RADIUS_M = 6_371_000.0


def haversine_oracle(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance via the asin formulation."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = (p2 - p1) / 2.0
    dlmb = math.radians(lon2 - lon1) / 2.0
    root = math.sqrt(
        math.sin(dphi) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlmb) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, root))


def point_in_ring(lon: float, lat: float, ring) -> bool:
    """Ray-casting point-in-ring test (boundary behaviour unspecified)."""
    inside = False
    n = len(ring) - 1  # closed ring repeats the first vertex
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[i + 1]
        if (y1 > lat) != (y2 > lat):
            x_cross = x1 + (lat - y1) * (x2 - x1) / (y2 - y1)
            if lon < x_cross:
                inside = not inside
    return inside


def point_in_polygon(lon: float, lat: float, polygon_coords) -> bool:
    """Inside the exterior ring and outside every hole."""
    if not point_in_ring(lon, lat, polygon_coords[0]):
        return False
    for hole in polygon_coords[1:]:
        if point_in_ring(lon, lat, hole):
            return False
    return True


def sample_edge_points(geom: Geometry, step_m: float) -> List[Tuple[float, float]]:
    """Points along every edge spaced at most ``step_m`` meters apart."""
    pts = list(geom.vertices())
    for (x1, y1), (x2, y2) in geom.segments():
        seg_len = haversine_oracle(y1, x1, y2, x2)
        n = max(1, int(math.ceil(seg_len / step_m)))
        for k in range(1, n):
            t = k / n
            pts.append((x1 + t * (x2 - x1), y1 + t * (y2 - y1)))
    return pts


def dense_distance_oracle(a: Geometry, b: Geometry, step_m: float = 5.0) -> float:
    """Min pairwise haversine over densely sampled edge points.

    Upper-bounds the true minimum distance; the gap shrinks with the step.
    """
    pa = sample_edge_points(a, step_m)
    pb = sample_edge_points(b, step_m)
    return min(
        haversine_oracle(y1, x1, y2, x2) for (x1, y1) in pa for (x2, y2) in pb
    )


# --- random geometry builders ------------------------------------------------

MUNICH_WINDOW = BoundingBox(48.10, 48.20, 11.45, 11.65)


def random_point(rng: random.Random, window: BoundingBox = MUNICH_WINDOW) -> Geometry:
    lon = rng.uniform(window.min_lon, window.max_lon)
    lat = rng.uniform(window.min_lat, window.max_lat)
    return Geometry(POINT, (lon, lat))


def random_linestring(
    rng: random.Random, window: BoundingBox = MUNICH_WINDOW, size: float = 0.004
) -> Geometry:
    lon = rng.uniform(window.min_lon + size, window.max_lon - size)
    lat = rng.uniform(window.min_lat + size, window.max_lat - size)
    n = rng.randint(2, 5)
    coords = []
    for _ in range(n):
        coords.append((lon, lat))
        lon += rng.uniform(-size, size)
        lat += rng.uniform(-size, size)
    return Geometry(LINESTRING, tuple(coords))


def random_ring(
    rng: random.Random, clon: float, clat: float, radius: float
) -> Tuple[Tuple[float, float], ...]:
    """Star-convex ring around a center: simple by construction."""
    n = rng.randint(3, 8)
    angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(n))
    # Degenerate angle spreads make near-zero-area slivers; nudge them apart.
    coords = []
    for idx, ang in enumerate(angles):
        ang += idx * 1e-4
        r = radius * rng.uniform(0.5, 1.0)
        coords.append((clon + r * math.cos(ang), clat + r * math.sin(ang)))
    coords.append(coords[0])
    return tuple(coords)


def random_polygon(
    rng: random.Random, window: BoundingBox = MUNICH_WINDOW, radius: float = 0.003
) -> Geometry:
    clon = rng.uniform(window.min_lon + radius, window.max_lon - radius)
    clat = rng.uniform(window.min_lat + radius, window.max_lat - radius)
    return Geometry(POLYGON, (random_ring(rng, clon, clat, radius),))


def random_multipolygon(
    rng: random.Random, window: BoundingBox = MUNICH_WINDOW
) -> Geometry:
    polys = tuple(
        random_polygon(rng, window).coordinates for _ in range(rng.randint(1, 3))
    )
    return Geometry(MULTIPOLYGON, polys)


def random_geometry(rng: random.Random, window: BoundingBox = MUNICH_WINDOW) -> Geometry:
    pick = rng.randrange(4)
    if pick == 0:
        return random_point(rng, window)
    if pick == 1:
        return random_linestring(rng, window)
    if pick == 2:
        return random_polygon(rng, window)
    return random_multipolygon(rng, window)


def random_geoset(
    rng: random.Random,
    count: int,
    database: str = "db",
    type_name: str = "t",
    window: BoundingBox = MUNICH_WINDOW,
) -> GeoSet:
    out = GeoSet()
    for i in range(count):
        key = EntityKey(database, type_name, f"e{i}", str(i))
        out.add(key, random_geometry(rng, window))
    return out


def naive_bbox_positions(geoset: GeoSet, box: BoundingBox) -> List[int]:
    """Brute-force positions whose geometry bbox intersects the box."""
    return [
        pos
        for pos, geom in enumerate(geoset.geometries())
        if geom.bbox().intersects(box)
    ]
