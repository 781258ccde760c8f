"""Spatial predicates, metric distance, and the bbox index.

Planar predicates run on lon/lat degrees through shapely. Buffer
predicates are metric: great-circle distance with an Earth radius of
6,371,000 m, refined in a local equirectangular plane around the nearest
vertex pair so edges (not just vertices) participate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from shapely import STRtree

from .errors import (
    DegenerateBox,
    MalformedDecision,
    MissingDistance,
    UnknownSpatialType,
)
from .geometry import BoundingBox, Geometry
from .keys import GeoSet

EARTH_RADIUS_M = 6_371_000.0

# Meters per degree used for conservative pruning margins.
M_PER_DEG_LAT = 110_574.0
M_PER_DEG_LON_EQUATOR = 111_320.0

BUFFER = "buffer"
INTERSECTS = "intersects"
CONTAINS = "contains"
WITHIN = "within"

SPATIAL_TYPES = (BUFFER, INTERSECTS, CONTAINS, WITHIN)


@dataclass(frozen=True)
class SpatialOpSpec:
    """A classified spatial operation.

    ``num`` is the buffer distance in meters and must be present (and
    positive) exactly when ``spatial_type`` is ``buffer``. ``negation``
    complements the predicate.
    """

    spatial_type: str
    num: Optional[float] = None
    negation: bool = False

    def __post_init__(self):
        if self.spatial_type not in SPATIAL_TYPES:
            raise UnknownSpatialType(str(self.spatial_type))
        if self.spatial_type == BUFFER:
            if self.num is None:
                raise MissingDistance("buffer requires a distance in meters")
            if not (isinstance(self.num, (int, float)) and self.num > 0):
                raise MissingDistance(f"buffer distance must be positive, got {self.num}")
        elif self.num is not None:
            raise MalformedDecision(
                f"{self.spatial_type} takes no distance, got num={self.num}"
            )


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters between two lat/lon points."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.atan2(math.sqrt(a), math.sqrt(1.0 - a))


def _vertex_array(geom: Geometry) -> np.ndarray:
    return np.array(list(geom.vertices()), dtype=float)


def _segment_arrays(geom: Geometry):
    segs = list(geom.segments())
    if not segs:
        return None
    a = np.array([s[0] for s in segs], dtype=float)
    b = np.array([s[1] for s in segs], dtype=float)
    return a, b


def _points_to_segments(points: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray) -> float:
    """Min distance from any point to any segment, all in plane units."""
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    ax, ay = seg_a[:, 0][None, :], seg_a[:, 1][None, :]
    bx, by = seg_b[:, 0][None, :], seg_b[:, 1][None, :]
    dx, dy = bx - ax, by - ay
    norm2 = dx * dx + dy * dy
    safe = np.where(norm2 > 0.0, norm2, 1.0)
    t = ((px - ax) * dx + (py - ay) * dy) / safe
    t = np.clip(np.where(norm2 > 0.0, t, 0.0), 0.0, 1.0)
    cx = ax + t * dx
    cy = ay + t * dy
    return float(np.min(np.hypot(px - cx, py - cy)))


def distance_m(a: Geometry, b: Geometry) -> float:
    """Minimum metric distance in meters between two geometries.

    Zero when the shapes intersect in the planar lon/lat sense. Otherwise
    the nearest vertex pair is found with haversine, then both shapes are
    projected into a local equirectangular plane centered there so that
    vertex-to-edge distances refine the estimate.
    """
    if a.shape.intersects(b.shape):
        return 0.0

    va = _vertex_array(a)
    vb = _vertex_array(b)

    lat_a = np.radians(va[:, 1])[:, None]
    lat_b = np.radians(vb[:, 1])[None, :]
    dphi = lat_b - lat_a
    dlmb = np.radians(vb[:, 0])[None, :] - np.radians(va[:, 0])[:, None]
    h = np.sin(dphi / 2.0) ** 2 + np.cos(lat_a) * np.cos(lat_b) * np.sin(dlmb / 2.0) ** 2
    h = np.clip(h, 0.0, 1.0)
    dists = 2.0 * EARTH_RADIUS_M * np.arctan2(np.sqrt(h), np.sqrt(1.0 - h))
    i, j = np.unravel_index(int(np.argmin(dists)), dists.shape)
    best = float(dists[i, j])

    # Local plane centered between the nearest vertices.
    lat0 = math.radians((va[i, 1] + vb[j, 1]) / 2.0)
    lon0 = (va[i, 0] + vb[j, 0]) / 2.0
    kx = EARTH_RADIUS_M * math.cos(lat0) * math.pi / 180.0
    ky = EARTH_RADIUS_M * math.pi / 180.0

    def project(arr: np.ndarray) -> np.ndarray:
        out = np.empty_like(arr)
        out[:, 0] = (arr[:, 0] - lon0) * kx
        out[:, 1] = arr[:, 1] * ky
        return out

    pa, pb = project(va), project(vb)
    segs_a = _segment_arrays(a)
    segs_b = _segment_arrays(b)

    candidates = [best]
    if segs_b is not None:
        sa, sb = segs_b
        candidates.append(_points_to_segments(pa, project(sa), project(sb)))
    if segs_a is not None:
        sa, sb = segs_a
        candidates.append(_points_to_segments(pb, project(sa), project(sb)))
    if segs_a is None and segs_b is None:
        # Two points: haversine already exact.
        return best
    return min(candidates)


def relate(subject: Geometry, obj: Geometry, spec: SpatialOpSpec) -> bool:
    """Evaluate one spatial operation between two geometries.

    Negation complements the un-negated outcome.
    """
    if spec.spatial_type == BUFFER:
        result = distance_m(subject, obj) <= float(spec.num)
    elif spec.spatial_type == INTERSECTS:
        result = bool(subject.shape.intersects(obj.shape))
    elif spec.spatial_type == CONTAINS:
        result = bool(subject.shape.contains(obj.shape))
    else:
        result = bool(subject.shape.within(obj.shape))
    return (not result) if spec.negation else result


def meters_to_degree_margin(meters: float, latitude: float) -> tuple:
    """Conservative (dlat, dlon) degree margin covering ``meters``.

    Inflated by 5% so index pruning with the margin never drops a true
    buffer match.
    """
    dlat = meters / M_PER_DEG_LAT
    cos_lat = max(math.cos(math.radians(latitude)), 1e-6)
    dlon = meters / (M_PER_DEG_LON_EQUATOR * cos_lat)
    return (dlat * 1.05, dlon * 1.05)


class SpatialIndex:
    """Immutable STR-tree over the bounding rectangles of a GeoSet.

    Query results are candidate positions into the originating set's
    insertion order; they are a superset of the true bbox-intersecting
    positions (exact on rectangles, so in practice equal).
    """

    def __init__(self, geoset: GeoSet):
        self._keys = geoset.keys()
        self._geoms = geoset.geometries()
        self._tree = STRtree([g.shape for g in self._geoms]) if self._geoms else None

    def __len__(self) -> int:
        return len(self._keys)

    def query_box(self, box: BoundingBox) -> List[int]:
        """Positions whose geometry bbox may intersect the box, ascending."""
        if self._tree is None:
            return []
        probe = box.polygon().shape
        return sorted(int(i) for i in self._tree.query(probe))

    def query_geometry(self, geom: Geometry, margin: tuple = (0.0, 0.0)) -> List[int]:
        """Positions whose bbox may intersect ``geom``'s bbox grown by margin."""
        if self._tree is None:
            return []
        box = geom.bbox()
        if margin != (0.0, 0.0):
            box = box.expand(margin[0], margin[1])
        return self.query_box(box)


def build_index(geoset: GeoSet) -> SpatialIndex:
    """Build the STR-tree index for a GeoSet."""
    return SpatialIndex(geoset)


def bbox_filter(geoset: GeoSet, box: BoundingBox) -> GeoSet:
    """Entries whose geometry bbox intersects ``box``, insertion order kept.

    Linear and exact; the index path must agree with this everywhere.
    """
    return geoset.within_box(box)


def bbox_filter_indexed(geoset: GeoSet, index: SpatialIndex, box: BoundingBox) -> GeoSet:
    """Index-accelerated :func:`bbox_filter`; candidates are re-checked."""
    keys = geoset.keys()
    geoms = geoset.geometries()
    picked = []
    for pos in index.query_box(box):
        if geoms[pos].bbox().intersects(box):
            picked.append(pos)
    picked.sort()
    return GeoSet((keys[p], geoms[p]) for p in picked)
