"""Region resolution: place text to bounding box, with agent-directed cuts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import requests

from .errors import (
    DegenerateBox,
    EmptyText,
    GeocoderUnavailable,
    MalformedDirective,
    PlaceNotFound,
)
from .geometry import BoundingBox
from .llm import LLMGateway, ask_json
from .prompts import AgentRole
from .textnorm import normalize

CUT_VALUES = ("north", "south", "east", "west", "central")


@dataclass(frozen=True)
class Directive:
    """What the bbox-modifier agent extracted from the region text."""

    place: str
    cut: Optional[str] = None
    scale: Optional[float] = None

    def __post_init__(self):
        if self.cut is not None and self.cut not in CUT_VALUES:
            raise MalformedDirective(f"unknown cut {self.cut!r}")
        if self.scale is not None and not (
            isinstance(self.scale, (int, float)) and self.scale > 0
        ):
            raise MalformedDirective(f"scale must be a positive number, got {self.scale!r}")

    @classmethod
    def from_payload(cls, payload) -> "Directive":
        if not isinstance(payload, dict):
            raise MalformedDirective(f"expected an object, got {type(payload).__name__}")
        if "place" not in payload:
            raise MalformedDirective("directive missing 'place'")
        place = payload["place"]
        if not isinstance(place, str):
            raise MalformedDirective(f"place must be text, got {type(place).__name__}")
        cut = payload.get("cut")
        scale = payload.get("scale")
        if isinstance(scale, bool):
            raise MalformedDirective("scale must be a number")
        if scale is not None and not isinstance(scale, (int, float)):
            raise MalformedDirective(f"scale must be a number, got {scale!r}")
        return cls(place=place.strip(), cut=cut, scale=scale)


@dataclass(frozen=True)
class GeocodeResult:
    box: BoundingBox
    display_name: str


class FixtureGeocoder:
    """Offline geocoder backed by a place -> box mapping."""

    def __init__(self, places: Dict[str, dict]):
        self._places = {normalize(k): v for k, v in places.items()}

    @classmethod
    def load(cls, path) -> "FixtureGeocoder":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def geocode(self, place: str) -> GeocodeResult:
        key = normalize(place)
        if not key:
            raise EmptyText("empty place text")
        entry = self._places.get(key)
        if entry is None:
            raise PlaceNotFound(place)
        return GeocodeResult(
            box=BoundingBox.from_list(entry["box"]),
            display_name=entry.get("display_name", place),
        )


class LiveGeocoder:
    """Search-endpoint client reading the first hit's bounding box."""

    def __init__(self, base_url: str, timeout: float = 10.0, user_agent: str = "geoask/0.1"):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.user_agent = user_agent

    def geocode(self, place: str) -> GeocodeResult:
        if not normalize(place):
            raise EmptyText("empty place text")
        try:
            resp = requests.get(
                f"{self.base_url}/search",
                params={"q": place, "format": "json", "limit": 1},
                headers={"User-Agent": self.user_agent},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise GeocoderUnavailable(str(exc))
        if resp.status_code != 200:
            raise GeocoderUnavailable(f"HTTP {resp.status_code}")
        hits = resp.json()
        if not hits:
            raise PlaceNotFound(place)
        first = hits[0]
        south, north, west, east = (float(v) for v in first["boundingbox"])
        return GeocodeResult(
            box=BoundingBox(south, north, west, east),
            display_name=first.get("display_name", place),
        )


def modify_bbox(box: BoundingBox, directive: Directive) -> BoundingBox:
    """Apply the directive's cut, then its scale factor."""
    out = box
    if directive.cut == "central":
        out = out.central()
    elif directive.cut is not None:
        out = out.cut(directive.cut)
    if directive.scale is not None:
        out = out.scale(directive.scale)
    if out.lat_extent == 0 or out.lon_extent == 0:
        raise DegenerateBox(f"zero extent after {directive}")
    return out


class RegionSelector:
    """Turns free-text region descriptions into bounding boxes."""

    def __init__(self, gateway: LLMGateway, geocoder):
        self.gateway = gateway
        self.geocoder = geocoder

    def resolve_region(self, region_text: str, session) -> Optional[BoundingBox]:
        """Resolve via the bbox-modifier agent; empty text means global scope.

        The resolved box is cached on the session per region text and also
        stored on the session as a WKT polygon for downstream steps.
        """
        text = normalize(region_text)
        if not text:
            return None
        cached = session.region_cache.get(text)
        if cached is not None:
            session.bbox_wkt = cached.polygon().wkt()
            return cached
        payload, _ = ask_json(
            self.gateway, AgentRole.BBOX_MODIFIER, region_text, session.session_id
        )
        directive = Directive.from_payload(payload)
        if not directive.place:
            return None
        result = self.geocoder.geocode(directive.place)
        box = modify_bbox(result.box, directive)
        session.region_cache[text] = box
        session.bbox_wkt = box.polygon().wkt()
        return box
