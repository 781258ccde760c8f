"""WGS84 vector geometries with strict WKT parsing.

Coordinates are (longitude, latitude) pairs in degrees. The parser is
hand-rolled so that error positions point at the offending offset in the
input text; predicate evaluation is delegated to shapely elsewhere via the
:attr:`Geometry.shape` view.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

import shapely
from shapely.geometry import shape as _geojson_shape

from .errors import DegenerateBox, MalformedWkt, UnsupportedKind

POINT = "point"
LINESTRING = "linestring"
POLYGON = "polygon"
MULTIPOLYGON = "multipolygon"

SUPPORTED_KINDS = (POINT, LINESTRING, POLYGON, MULTIPOLYGON)

# WKT kinds we recognise but do not model.
_KNOWN_OTHER = {
    "multipoint",
    "multilinestring",
    "geometrycollection",
    "circularstring",
    "triangle",
    "tin",
    "polyhedralsurface",
}

Coord = Tuple[float, float]


def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


@dataclass(frozen=True)
class Geometry:
    """One parsed geometry.

    Parameters
    ----------
    kind : str
        One of ``point``, ``linestring``, ``polygon``, ``multipolygon``.
    coordinates : tuple
        Nested coordinate tuples; nesting depth depends on ``kind``.
        Points hold a single (lon, lat) pair, linestrings a sequence of
        pairs, polygons a sequence of rings, multipolygons a sequence of
        polygons.
    """

    kind: str
    coordinates: tuple
    _shape_cache: list = field(
        default_factory=list, repr=False, compare=False, hash=False
    )

    @property
    def shape(self):
        """The equivalent shapely geometry, built lazily and cached."""
        if not self._shape_cache:
            self._shape_cache.append(shapely.from_wkt(self.wkt()))
        return self._shape_cache[0]

    def wkt(self) -> str:
        """Serialize back to WKT.

        Round-trips through :func:`parse_wkt` with exact coordinates:
        floats are emitted with shortest-repr precision.
        """
        if self.kind == POINT:
            body = _fmt_coord(self.coordinates)
        elif self.kind == LINESTRING:
            body = _fmt_seq(self.coordinates)
        elif self.kind == POLYGON:
            body = _fmt_rings(self.coordinates)
        else:
            parts = ", ".join(_fmt_rings(poly) for poly in self.coordinates)
            body = f"({parts})"
        return f"{self.kind.upper()} {body}"

    def vertices(self) -> Iterator[Coord]:
        """Yield every coordinate pair in order."""
        if self.kind == POINT:
            yield self.coordinates
        elif self.kind == LINESTRING:
            yield from self.coordinates
        elif self.kind == POLYGON:
            for ring in self.coordinates:
                yield from ring
        else:
            for poly in self.coordinates:
                for ring in poly:
                    yield from ring

    def segments(self) -> Iterator[Tuple[Coord, Coord]]:
        """Yield every edge as a coordinate pair; points yield nothing."""
        if self.kind == POINT:
            return
        if self.kind == LINESTRING:
            paths: Sequence[Sequence[Coord]] = [self.coordinates]
        elif self.kind == POLYGON:
            paths = self.coordinates
        else:
            paths = [ring for poly in self.coordinates for ring in poly]
        for path in paths:
            for a, b in zip(path, path[1:]):
                yield a, b

    def bbox(self) -> "BoundingBox":
        lons = [c[0] for c in self.vertices()]
        lats = [c[1] for c in self.vertices()]
        return BoundingBox(min(lats), max(lats), min(lons), max(lons))


def _fmt_coord(coord: Coord) -> str:
    return f"({_fmt(coord[0])} {_fmt(coord[1])})"


def _fmt_seq(coords: Sequence[Coord]) -> str:
    inner = ", ".join(f"{_fmt(c[0])} {_fmt(c[1])}" for c in coords)
    return f"({inner})"


def _fmt_rings(rings: Sequence[Sequence[Coord]]) -> str:
    inner = ", ".join(_fmt_seq(ring) for ring in rings)
    return f"({inner})"


class _Scanner:
    """Tokenizer over WKT text tracking the current offset."""

    _WORD = re.compile(r"[A-Za-z]+")
    _NUMBER = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        self.skip_ws()
        if self.pos >= len(self.text):
            raise MalformedWkt(self.pos, f"expected {char!r}, found end of text")
        if self.text[self.pos] != char:
            raise MalformedWkt(
                self.pos, f"expected {char!r}, found {self.text[self.pos]!r}"
            )
        self.pos += 1

    def word(self) -> str:
        self.skip_ws()
        m = self._WORD.match(self.text, self.pos)
        if not m:
            raise MalformedWkt(self.pos, "expected a geometry keyword")
        self.pos = m.end()
        return m.group(0)

    def number(self) -> float:
        self.skip_ws()
        m = self._NUMBER.match(self.text, self.pos)
        if not m:
            found = self.text[self.pos] if self.pos < len(self.text) else "end of text"
            raise MalformedWkt(self.pos, f"expected a number, found {found!r}")
        self.pos = m.end()
        return float(m.group(0))


def _read_coord(scanner: _Scanner) -> Coord:
    lon_pos = scanner.pos
    lon = scanner.number()
    lat_pos = scanner.pos
    lat = scanner.number()
    if not -180.0 <= lon <= 180.0:
        raise MalformedWkt(lon_pos, f"longitude {lon} outside [-180, 180]")
    if not -90.0 <= lat <= 90.0:
        raise MalformedWkt(lat_pos, f"latitude {lat} outside [-90, 90]")
    return (lon, lat)


def _read_coord_seq(scanner: _Scanner) -> Tuple[Coord, ...]:
    scanner.expect("(")
    coords = [_read_coord(scanner)]
    while scanner.peek() == ",":
        scanner.expect(",")
        coords.append(_read_coord(scanner))
    scanner.expect(")")
    return tuple(coords)


def _read_ring(scanner: _Scanner) -> Tuple[Coord, ...]:
    start = scanner.pos
    ring = _read_coord_seq(scanner)
    if len(ring) < 4:
        raise MalformedWkt(start, f"ring has {len(ring)} points, need at least 4")
    if ring[0] != ring[-1]:
        raise MalformedWkt(start, "ring is not closed")
    return ring


def _read_polygon_body(scanner: _Scanner) -> Tuple[Tuple[Coord, ...], ...]:
    scanner.expect("(")
    rings = [_read_ring(scanner)]
    while scanner.peek() == ",":
        scanner.expect(",")
        rings.append(_read_ring(scanner))
    scanner.expect(")")
    return tuple(rings)


def parse_wkt(text: str) -> Geometry:
    """Parse WKT into a :class:`Geometry`.

    Parameters
    ----------
    text : str
        WKT for one of the four supported kinds. Case-insensitive keyword,
        arbitrary whitespace.

    Raises
    ------
    MalformedWkt
        Syntax errors, unclosed rings, out-of-range coordinates, or
        trailing junk; carries the character offset and a reason.
    UnsupportedKind
        Recognised WKT kinds outside the supported four.
    """
    if not isinstance(text, str) or not text.strip():
        raise MalformedWkt(0, "empty input")
    scanner = _Scanner(text)
    keyword_pos = scanner.pos
    keyword = scanner.word().lower()
    if keyword in _KNOWN_OTHER:
        raise UnsupportedKind(keyword)
    if keyword not in SUPPORTED_KINDS:
        raise MalformedWkt(keyword_pos, f"unknown geometry keyword {keyword!r}")

    scanner.skip_ws()
    if scanner.text[scanner.pos :].lower().startswith("empty"):
        raise MalformedWkt(scanner.pos, "empty geometries are not supported")

    if keyword == POINT:
        scanner.expect("(")
        coords: tuple = _read_coord(scanner)
        scanner.expect(")")
    elif keyword == LINESTRING:
        seq_pos = scanner.pos
        coords = _read_coord_seq(scanner)
        if len(coords) < 2:
            raise MalformedWkt(seq_pos, "linestring needs at least 2 points")
    elif keyword == POLYGON:
        coords = _read_polygon_body(scanner)
    else:
        scanner.expect("(")
        polys = [_read_polygon_body(scanner)]
        while scanner.peek() == ",":
            scanner.expect(",")
            polys.append(_read_polygon_body(scanner))
        scanner.expect(")")
        coords = tuple(polys)

    if not scanner.at_end():
        raise MalformedWkt(scanner.pos, "trailing characters after geometry")
    return Geometry(keyword, coords)


def from_geojson(obj: dict) -> Geometry:
    """Build a :class:`Geometry` from a GeoJSON geometry mapping.

    Goes through shapely's reader for coordinate-structure handling, then
    re-parses the emitted WKT so all validation applies uniformly.
    """
    if not isinstance(obj, dict) or "type" not in obj:
        raise MalformedWkt(0, "not a GeoJSON geometry object")
    gtype = str(obj.get("type", "")).lower()
    if gtype not in SUPPORTED_KINDS:
        raise UnsupportedKind(gtype)
    try:
        shp = _geojson_shape(obj)
    except Exception as exc:
        raise MalformedWkt(0, f"bad GeoJSON geometry: {exc}") from exc
    return parse_wkt(shp.wkt)


@dataclass(frozen=True)
class BoundingBox:
    """Geographic bounding box.

    Serializes as ``[min_lat, max_lat, min_lon, max_lon]``, the order the
    geocoder returns and the service transports.
    """

    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise DegenerateBox(
                f"inverted box: {self.as_list()}"
            )

    def as_list(self) -> List[float]:
        return [self.min_lat, self.max_lat, self.min_lon, self.max_lon]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "BoundingBox":
        if len(values) != 4:
            raise DegenerateBox(f"expected 4 values, got {len(values)}")
        return cls(float(values[0]), float(values[1]), float(values[2]), float(values[3]))

    @property
    def lat_extent(self) -> float:
        return self.max_lat - self.min_lat

    @property
    def lon_extent(self) -> float:
        return self.max_lon - self.min_lon

    @property
    def center(self) -> Tuple[float, float]:
        """(lat, lon) midpoint."""
        return (
            (self.min_lat + self.max_lat) / 2.0,
            (self.min_lon + self.max_lon) / 2.0,
        )

    def intersects(self, other: "BoundingBox") -> bool:
        return not (
            self.max_lat < other.min_lat
            or other.max_lat < self.min_lat
            or self.max_lon < other.min_lon
            or other.max_lon < self.min_lon
        )

    def contains_point(self, lon: float, lat: float) -> bool:
        return (
            self.min_lat <= lat <= self.max_lat
            and self.min_lon <= lon <= self.max_lon
        )

    def expand(self, dlat: float, dlon: float) -> "BoundingBox":
        return BoundingBox(
            self.min_lat - dlat,
            self.max_lat + dlat,
            self.min_lon - dlon,
            self.max_lon + dlon,
        )

    def polygon(self) -> Geometry:
        """Box outline as a closed polygon."""
        ring = (
            (self.min_lon, self.min_lat),
            (self.max_lon, self.min_lat),
            (self.max_lon, self.max_lat),
            (self.min_lon, self.max_lat),
            (self.min_lon, self.min_lat),
        )
        return Geometry(POLYGON, (ring,))

    def _require_extent(self) -> None:
        if self.lat_extent <= 0.0 or self.lon_extent <= 0.0:
            raise DegenerateBox(f"zero extent: {self.as_list()}")

    def cut(self, direction: str) -> "BoundingBox":
        """Keep one directional half of the box.

        ``south``/``north`` halve the latitude span, ``west``/``east`` the
        longitude span; the other axis is untouched.
        """
        self._require_extent()
        mid_lat = (self.min_lat + self.max_lat) / 2.0
        mid_lon = (self.min_lon + self.max_lon) / 2.0
        if direction == "south":
            return BoundingBox(self.min_lat, mid_lat, self.min_lon, self.max_lon)
        if direction == "north":
            return BoundingBox(mid_lat, self.max_lat, self.min_lon, self.max_lon)
        if direction == "west":
            return BoundingBox(self.min_lat, self.max_lat, self.min_lon, mid_lon)
        if direction == "east":
            return BoundingBox(self.min_lat, self.max_lat, mid_lon, self.max_lon)
        raise DegenerateBox(f"unknown cut direction: {direction!r}")

    def central(self) -> "BoundingBox":
        """The middle 50% along both axes."""
        return self.scale(0.5)

    def scale(self, factor: float) -> "BoundingBox":
        """Scale both extents about the center."""
        self._require_extent()
        if factor <= 0:
            raise DegenerateBox(f"scale factor must be positive, got {factor}")
        clat, clon = self.center
        half_lat = self.lat_extent * factor / 2.0
        half_lon = self.lon_extent * factor / 2.0
        return BoundingBox(
            clat - half_lat, clat + half_lat, clon - half_lon, clon + half_lon
        )


def geometry_area_m2(geom: Geometry) -> float:
    """Approximate area in square meters.

    Planar degree area scaled by the meter-per-degree factors at the
    geometry's bbox center latitude; adequate at city scale.
    """
    box = geom.bbox()
    lat = math.radians(box.center[0])
    m_per_deg_lat = 110_574.0
    m_per_deg_lon = 111_320.0 * math.cos(lat)
    return float(geom.shape.area) * m_per_deg_lat * m_per_deg_lon
