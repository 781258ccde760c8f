"""Entity keys and ordered geometry collections."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .errors import KeyParseError
from .geometry import BoundingBox, Geometry, parse_wkt


@dataclass(frozen=True, order=True)
class EntityKey:
    """Identity of one stored feature: database, type, name, id.

    Encodes as ``Database_Type_Name_Id``. The name segment may contain
    spaces and underscores; the other three segments may not contain
    underscores, which keeps decoding unambiguous (two fixed segments from
    the left, one from the right).
    """

    database: str
    type_name: str
    name: str
    id: str

    def __post_init__(self):
        for label in ("database", "type_name", "id"):
            value = getattr(self, label)
            if not value:
                raise KeyParseError(f"empty {label} segment")
            if "_" in value:
                raise KeyParseError(f"{label} may not contain underscores: {value!r}")
        if not self.name:
            raise KeyParseError("empty name segment")

    def encode(self) -> str:
        return f"{self.database}_{self.type_name}_{self.name}_{self.id}"

    @classmethod
    def parse(cls, text: str) -> "EntityKey":
        parts = text.split("_")
        if len(parts) < 4:
            raise KeyParseError(
                f"expected at least 4 underscore-separated segments, got {len(parts)}: {text!r}"
            )
        database, type_name = parts[0], parts[1]
        entity_id = parts[-1]
        name = "_".join(parts[2:-1])
        if not all([database, type_name, name, entity_id]):
            raise KeyParseError(f"empty segment in key: {text!r}")
        return cls(database, type_name, name, entity_id)

    def __str__(self) -> str:
        return self.encode()


class GeoSet:
    """Ordered, unique mapping from :class:`EntityKey` to :class:`Geometry`.

    Iteration order is insertion order; re-adding an existing key replaces
    its geometry without duplicating or moving it.
    """

    def __init__(self, items: Optional[Iterable[Tuple[EntityKey, Geometry]]] = None):
        self._items: Dict[EntityKey, Geometry] = {}
        if items:
            for key, geom in items:
                self._items[key] = geom

    def add(self, key: EntityKey, geometry: Geometry) -> None:
        self._items[key] = geometry

    def get(self, key: EntityKey) -> Optional[Geometry]:
        return self._items.get(key)

    def keys(self) -> List[EntityKey]:
        return list(self._items)

    def geometries(self) -> List[Geometry]:
        return list(self._items.values())

    def items(self) -> List[Tuple[EntityKey, Geometry]]:
        return list(self._items.items())

    def __iter__(self) -> Iterator[EntityKey]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, key: EntityKey) -> bool:
        return key in self._items

    def __eq__(self, other) -> bool:
        if not isinstance(other, GeoSet):
            return NotImplemented
        return self._items == other._items

    def __repr__(self) -> str:
        return f"GeoSet({len(self._items)} entities)"

    def union(self, other: "GeoSet") -> "GeoSet":
        """Self's entries first, then other's new ones."""
        merged = GeoSet(self.items())
        for key, geom in other.items():
            if key not in merged:
                merged.add(key, geom)
        return merged

    def subset(self, keys: Iterable[EntityKey]) -> "GeoSet":
        """Entries for the given keys, in this set's order."""
        wanted = set(keys)
        return GeoSet((k, g) for k, g in self.items() if k in wanted)

    def key_set(self) -> set:
        return set(self._items)

    def within_box(self, box: BoundingBox) -> "GeoSet":
        """Entries whose geometry bbox intersects the box, order kept."""
        return GeoSet(
            (k, g) for k, g in self.items() if g.bbox().intersects(box)
        )

    def to_jsonable(self) -> List[dict]:
        return [
            {"key": key.encode(), "wkt": geom.wkt()} for key, geom in self.items()
        ]

    @classmethod
    def from_jsonable(cls, rows: Iterable[dict]) -> "GeoSet":
        out = cls()
        for row in rows:
            out.add(EntityKey.parse(row["key"]), parse_wkt(row["wkt"]))
        return out

    def digest(self) -> str:
        """Stable content hash over keys and serialized geometries."""
        payload = json.dumps(self.to_jsonable(), sort_keys=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()
