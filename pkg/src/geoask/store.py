"""Knowledge store: geometries, embedding index, and the schema graph.

One ingested GeoJSON document becomes one table owned by a same-named
database node. Three stores stay synchronized: per-table geometry rows,
an embedding index over distinct textual values, and the schema graph
linking databases, tables, category values, and entry names.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import requests

from .errors import (
    BackendUnavailable,
    EmptyIndex,
    EmptyText,
    KeyParseError,
    NotFeatureCollection,
    UnknownTable,
)
from .geometry import BoundingBox, Geometry, from_geojson
from .keys import EntityKey, GeoSet
from .spatial import SpatialIndex
from .textnorm import normalize, singular_phrase, singularize, tokenize

EMBEDDING_DIM = 256

KIND_TABLE = "table"
KIND_CATEGORY = "category"
KIND_ENTRY_NAME = "entry_name"

NODE_DATABASE = "database"
NODE_TABLE = "table"
NODE_FCLASS = "fclass"
NODE_NAME = "name"

EDGE_DATABASE_TABLE = "database_table"
EDGE_TABLE_FCLASS = "table_fclass"
EDGE_TABLE_NAME = "table_name"
REVERSE_SUFFIX = "_reverse"


# --- embedding backends ------------------------------------------------------


class HashEmbedder:
    """Deterministic character-trigram hashing into 256 dimensions.

    Tokens are padded with ``#`` so short words still contribute; counts
    are L2-normalized. Surface-similar texts ("park"/"parks") share most
    trigrams and score high.
    """

    dim = EMBEDDING_DIM

    def __init__(self):
        self.calls = 0

    def embed(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            raise EmptyText(f"nothing to embed in {text!r}")
        self.calls += 1
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            padded = f"#{token}#"
            for i in range(len(padded) - 2):
                trigram = padded[i : i + 3]
                digest = hashlib.sha1(trigram.encode("utf-8")).digest()
                vec[int.from_bytes(digest[:4], "big") % self.dim] += 1.0
        return vec / np.linalg.norm(vec)


class RecordedEmbedder:
    """Replays frozen vectors keyed by normalized text.

    The analogue of a scripted chat transcript for the embedding side:
    fixtures freeze the vectors a live semantic backend would produce.
    Unknown texts fall back to the hash backend so ingestion never stalls.
    """

    dim = EMBEDDING_DIM

    def __init__(self, mapping: Dict[str, Sequence[float]], fallback=None):
        self._vectors: Dict[str, np.ndarray] = {}
        for text, values in mapping.items():
            arr = np.asarray(values, dtype=np.float64)
            norm = np.linalg.norm(arr)
            if norm == 0:
                raise EmptyText(f"zero vector recorded for {text!r}")
            self._vectors[normalize(text)] = arr / norm
        self.fallback = fallback or HashEmbedder()
        self.calls = 0

    @classmethod
    def load(cls, path, fallback=None) -> "RecordedEmbedder":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), fallback)

    def embed(self, text: str) -> np.ndarray:
        key = normalize(text)
        if not key:
            raise EmptyText(f"nothing to embed in {text!r}")
        self.calls += 1
        hit = self._vectors.get(key)
        if hit is not None:
            return hit.copy()
        return self.fallback.embed(text)


class LiveEmbedder:
    """Embedding endpoint client with the same retry posture as the chat gateway."""

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        model: str = "text-embedding-3-small",
        retry_limit: int = 3,
        timeout: float = 30.0,
        sleeper=time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.retry_limit = retry_limit
        self.timeout = timeout
        self._sleep = sleeper
        self.calls = 0

    def embed(self, text: str) -> np.ndarray:
        if not normalize(text):
            raise EmptyText(f"nothing to embed in {text!r}")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Optional[Exception] = None
        for attempt in range(self.retry_limit + 1):
            if attempt:
                self._sleep(0.5 * (2 ** (attempt - 1)))
            try:
                resp = requests.post(
                    f"{self.base_url}/embeddings",
                    json={"model": self.model, "input": text},
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in (429,) or resp.status_code >= 500:
                last_error = RuntimeError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            self.calls += 1
            arr = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
            return arr / np.linalg.norm(arr)
        raise BackendUnavailable(str(last_error))


# --- vector index -------------------------------------------------------------


@dataclass(frozen=True)
class VectorRecord:
    text: str
    kind: str
    table: str


@dataclass(frozen=True)
class CandidateMatch:
    kind: str
    table: str
    value: str
    score: float

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "table": self.table,
            "value": self.value,
            "score": round(self.score, 6),
        }


class VectorIndex:
    """Unit-norm vectors with cosine search, unique on (text, kind, table)."""

    def __init__(self, dim: int = EMBEDDING_DIM):
        self.dim = dim
        self._records: List[VectorRecord] = []
        self._rows: List[np.ndarray] = []
        self._seen: Set[Tuple[str, str, str]] = set()
        self._matrix: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> List[VectorRecord]:
        return list(self._records)

    def contains(self, text: str, kind: str, table: str) -> bool:
        return (text, kind, table) in self._seen

    def add(self, record: VectorRecord, vector: np.ndarray) -> bool:
        """Store one record; returns False for an exact duplicate."""
        key = (record.text, record.kind, record.table)
        if key in self._seen:
            return False
        norm = float(np.linalg.norm(vector))
        if abs(norm - 1.0) > 1e-6:
            vector = vector / norm
        self._seen.add(key)
        self._records.append(record)
        self._rows.append(np.asarray(vector, dtype=np.float64))
        self._matrix = None
        return True

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = (
                np.vstack(self._rows) if self._rows else np.zeros((0, self.dim))
            )
        return self._matrix

    def search(
        self,
        query_vector: np.ndarray,
        k: int = 50,
        scope: Optional[str] = None,
        kinds: Optional[Iterable[str]] = None,
        min_score: float = 0.0,
    ) -> List[CandidateMatch]:
        kind_set = set(kinds) if kinds else None
        positions = [
            i
            for i, rec in enumerate(self._records)
            if (scope is None or rec.table == scope)
            and (kind_set is None or rec.kind in kind_set)
        ]
        if not positions:
            raise EmptyIndex(
                f"no indexed vectors for scope={scope!r} kinds={sorted(kind_set) if kind_set else 'all'}"
            )
        scores = self.matrix()[positions] @ np.asarray(query_vector, dtype=np.float64)
        ranked = sorted(
            (
                CandidateMatch(
                    self._records[pos].kind,
                    self._records[pos].table,
                    self._records[pos].text,
                    float(score),
                )
                for pos, score in zip(positions, scores)
                if float(score) >= min_score
            ),
            key=lambda m: (-m.score, m.value),
        )
        return ranked[:k]

    def to_jsonable(self) -> List[dict]:
        return [
            {"text": r.text, "kind": r.kind, "table": r.table} for r in self._records
        ]


# --- schema graph -------------------------------------------------------------

NodeRef = Tuple[str, str]  # (type, id)


class SchemaGraph:
    """Directed graph over database/table/fclass/name nodes.

    Every forward edge gets a mirrored edge whose type carries the
    ``_reverse`` suffix, so one-hop traversal works in both directions.
    """

    def __init__(self):
        self._nodes: Dict[NodeRef, None] = {}
        self._edges: Set[Tuple[str, NodeRef, NodeRef]] = set()
        self._out: Dict[NodeRef, List[Tuple[str, NodeRef]]] = {}

    def add_node(self, node_type: str, node_id: str) -> NodeRef:
        ref = (node_type, node_id)
        self._nodes.setdefault(ref, None)
        return ref

    def has_node(self, node_type: str, node_id: str) -> bool:
        return (node_type, node_id) in self._nodes

    def add_edge(self, edge_type: str, source: NodeRef, target: NodeRef) -> None:
        """Insert the edge and its reverse twin (idempotent)."""
        for ref in (source, target):
            if ref not in self._nodes:
                raise KeyError(f"unknown node {ref}")
        forward = (edge_type, source, target)
        if forward in self._edges:
            return
        backward = (edge_type + REVERSE_SUFFIX, target, source)
        self._edges.add(forward)
        self._edges.add(backward)
        self._out.setdefault(source, []).append((edge_type, target))
        self._out.setdefault(target, []).append((edge_type + REVERSE_SUFFIX, source))

    def nodes(self, node_type: Optional[str] = None) -> List[NodeRef]:
        refs = list(self._nodes)
        if node_type is not None:
            refs = [r for r in refs if r[0] == node_type]
        return refs

    def edges(self) -> List[Tuple[str, NodeRef, NodeRef]]:
        return sorted(self._edges)

    def edge_types(self) -> Set[str]:
        return {e[0] for e in self._edges}

    def neighbors(self, ref: NodeRef, edge_type: Optional[str] = None) -> List[NodeRef]:
        out = self._out.get(ref, [])
        return sorted(t for et, t in out if edge_type is None or et == edge_type)

    def out_edges(self, ref: NodeRef, edge_type: Optional[str] = None) -> List[NodeRef]:
        """Neighbors in edge insertion order (graph-query row order)."""
        out = self._out.get(ref, [])
        return [t for et, t in out if edge_type is None or et == edge_type]

    def to_jsonable(self) -> dict:
        return {
            "nodes": [
                {"type": t, "id": i} for t, i in sorted(self._nodes)
            ],
            "links": [
                {"edge_type": et, "source": list(s), "target": list(t)}
                for et, s, t in sorted(self._edges)
            ],
        }

    @classmethod
    def from_jsonable(cls, payload: dict) -> "SchemaGraph":
        graph = cls()
        for node in payload.get("nodes", []):
            graph.add_node(node["type"], node["id"])
        for link in payload.get("links", []):
            if link["edge_type"].endswith(REVERSE_SUFFIX):
                continue
            graph.add_edge(
                link["edge_type"], tuple(link["source"]), tuple(link["target"])
            )
        return graph


# --- the store ----------------------------------------------------------------


@dataclass(frozen=True)
class IngestReport:
    dataset: str
    tables: int
    features: int
    embedded_values: int
    skipped: List[Tuple[int, str]] = field(default_factory=list)

    def stored(self) -> int:
        return self.features - len(self.skipped)


@dataclass
class _Row:
    key: EntityKey
    geometry: Geometry
    name: str
    category: str


@dataclass
class _Table:
    name: str
    database: str
    rows: Dict[EntityKey, _Row] = field(default_factory=dict)
    geoset: GeoSet = field(default_factory=GeoSet)
    index: Optional[SpatialIndex] = None

    def rebuild(self) -> None:
        self.geoset = GeoSet((row.key, row.geometry) for row in self.rows.values())
        self.index = SpatialIndex(self.geoset)


_SEGMENT_CLEAN = re.compile(r"\s+")


def _key_segment(value: str) -> str:
    """Make a value safe as a database/type/id key segment."""
    return _SEGMENT_CLEAN.sub(" ", str(value).strip()).replace("_", "-")


class KnowledgeStore:
    """Facade over the three synchronized stores."""

    def __init__(self, embedder=None):
        self.embedder = embedder or HashEmbedder()
        self.graph = SchemaGraph()
        self.vectors = VectorIndex(getattr(self.embedder, "dim", EMBEDDING_DIM))
        self._tables: Dict[str, _Table] = {}
        # keyword -> ordered unique (kind, table, value)
        self._keywords: Dict[str, List[Tuple[str, str, str]]] = {}
        self._lock = threading.RLock()

    # -- ingestion --------------------------------------------------------

    def ingest_geojson(self, dataset_name: str, document: dict) -> IngestReport:
        if not isinstance(document, dict) or document.get("type") != "FeatureCollection":
            raise NotFeatureCollection(
                f"expected a FeatureCollection, got {document.get('type') if isinstance(document, dict) else type(document).__name__}"
            )
        features = document.get("features")
        if not isinstance(features, list):
            raise NotFeatureCollection("FeatureCollection without a features list")
        dataset = _SEGMENT_CLEAN.sub(" ", str(dataset_name).strip())
        if not dataset:
            raise KeyParseError("dataset name is empty")
        if "_" in dataset:
            raise KeyParseError(
                f"dataset name {dataset!r} may not contain underscores; it becomes a key segment"
            )

        with self._lock:
            table = self._tables.setdefault(dataset, _Table(dataset, dataset))
            db_ref = self.graph.add_node(NODE_DATABASE, dataset)
            table_ref = self.graph.add_node(NODE_TABLE, dataset)
            self.graph.add_edge(EDGE_DATABASE_TABLE, db_ref, table_ref)
            self._add_keyword(singular_phrase(dataset), KIND_TABLE, dataset, singular_phrase(dataset))
            embedded = self._embed_value(dataset, KIND_TABLE, dataset)

            staged = dict(table.rows)
            skipped: List[Tuple[int, str]] = []
            # Counter restarts per document so re-ingesting the same file
            # mints the same keys (idempotent upsert).
            counter = 0
            for idx, feature in enumerate(features):
                if not isinstance(feature, dict):
                    skipped.append((idx, "feature is not an object"))
                    continue
                geometry_obj = feature.get("geometry")
                if not geometry_obj:
                    skipped.append((idx, "null geometry"))
                    continue
                try:
                    geometry = from_geojson(geometry_obj)
                except Exception as exc:
                    skipped.append((idx, str(exc)))
                    continue
                props = feature.get("properties") or {}
                category = str(props.get("fclass") or props.get("category") or "").strip()
                name = str(props.get("name") or "").strip()
                explicit_id = props.get("osm_id", props.get("id"))
                if explicit_id is None or str(explicit_id).strip() == "":
                    counter += 1
                    entity_id = str(counter)
                else:
                    entity_id = _key_segment(str(explicit_id))
                key = EntityKey(
                    database=dataset,
                    type_name=_key_segment(category) or dataset,
                    name=name or "unnamed",
                    id=entity_id,
                )
                staged[key] = _Row(key, geometry, name, category)

                if category:
                    ref = self.graph.add_node(NODE_FCLASS, category)
                    self.graph.add_edge(EDGE_TABLE_FCLASS, table_ref, ref)
                    self._add_keyword(singular_phrase(category), KIND_CATEGORY, dataset, category)
                    embedded += self._embed_value(category, KIND_CATEGORY, dataset)
                if name:
                    ref = self.graph.add_node(NODE_NAME, name)
                    self.graph.add_edge(EDGE_TABLE_NAME, table_ref, ref)
                    self._add_keyword(singular_phrase(name), KIND_ENTRY_NAME, dataset, name)
                    embedded += self._embed_value(name, KIND_ENTRY_NAME, dataset)

            # Swap the row map in one step so concurrent readers never see
            # half a dataset.
            table.rows = staged
            table.rebuild()
            return IngestReport(
                dataset=dataset,
                tables=1,
                features=len(features),
                embedded_values=embedded,
                skipped=skipped,
            )

    def _embed_value(self, text: str, kind: str, table: str) -> int:
        if self.vectors.contains(text, kind, table):
            return 0
        record = VectorRecord(text=text, kind=kind, table=table)
        return 1 if self.vectors.add(record, self.embedder.embed(text)) else 0

    def _add_keyword(self, keyword: str, kind: str, table: str, value: str) -> None:
        if not keyword:
            return
        entries = self._keywords.setdefault(keyword, [])
        item = (kind, table, value)
        if item not in entries:
            entries.append(item)

    # -- lookups ----------------------------------------------------------

    def tables(self) -> List[str]:
        return list(self._tables)

    def database_of(self, table: str) -> str:
        self._require_table(table)
        return self._tables[table].database

    def embed(self, text: str) -> np.ndarray:
        return self.embedder.embed(text)

    def similarity_search(
        self,
        query: str,
        k: int = 50,
        scope: Optional[str] = None,
        kinds: Optional[Iterable[str]] = None,
        min_score: float = 0.0,
    ) -> List[CandidateMatch]:
        return self.vectors.search(
            self.embedder.embed(query), k=k, scope=scope, kinds=kinds, min_score=min_score
        )

    @staticmethod
    def _shadow_value_hits(entries: List[Tuple[str, str, str]]) -> List[Tuple[str, str, str]]:
        """A table hit shadows same-keyword value hits from its own table.

        Source data routinely stores the table's own name as a category
        value (a buildings layer classed "building"); the table match is
        the canonical answer for that keyword then.
        """
        tables_here = {table for kind, table, _ in entries if kind == KIND_TABLE}
        return [e for e in entries if e[0] == KIND_TABLE or e[1] not in tables_here]

    def keyword_lookup(self, term: str) -> List[Tuple[str, str, str]]:
        """Exact and token-substring keyword matches, registration order."""
        tokens = [singularize(t) for t in tokenize(term)]
        if not tokens:
            return []
        joined = " ".join(tokens)
        token_set = set(tokens)
        hits: List[Tuple[str, str, str]] = []
        for keyword, entries in self._keywords.items():
            matched = (
                keyword == joined
                or keyword in token_set
                or (" " in keyword and f" {keyword} " in f" {joined} ")
            )
            if matched:
                for item in self._shadow_value_hits(entries):
                    if item not in hits:
                        hits.append(item)
        return hits

    def exact_keyword(self, term: str) -> List[Tuple[str, str, str]]:
        """Entries whose keyword equals the full singularized term."""
        return self._shadow_value_hits(self._keywords.get(singular_phrase(term), []))

    def get_geometries(
        self,
        table: str,
        category: Optional[str] = None,
        names: Optional[Iterable[str]] = None,
        box: Optional[BoundingBox] = None,
    ) -> GeoSet:
        self._require_table(table)
        entry = self._tables[table]
        name_set = {normalize(n) for n in names} if names else None
        out = GeoSet()
        for row in entry.rows.values():
            if category is not None and row.category != category:
                continue
            if name_set is not None and normalize(row.name) not in name_set:
                continue
            if box is not None and not row.geometry.bbox().intersects(box):
                continue
            out.add(row.key, row.geometry)
        return out

    def table_geoset(self, table: str) -> GeoSet:
        self._require_table(table)
        return self._tables[table].geoset

    def sample_values(self, table: str, kind: str, limit: int = 20) -> List[str]:
        """Distinct name or category values from a table's first rows."""
        self._require_table(table)
        out: List[str] = []
        for row in self._tables[table].rows.values():
            value = row.name if kind == KIND_ENTRY_NAME else row.category
            if value and value not in out:
                out.append(value)
            if len(out) >= limit:
                break
        return out

    def _require_table(self, table: str) -> None:
        if table not in self._tables:
            raise UnknownTable(table)

    # -- persistence --------------------------------------------------------

    def save(self, data_dir) -> None:
        root = Path(data_dir)
        root.mkdir(parents=True, exist_ok=True)
        (root / "graph.json").write_text(
            json.dumps(self.graph.to_jsonable(), indent=2, ensure_ascii=False),
            encoding="utf-8",
        )
        (root / "vector_meta.json").write_text(
            json.dumps(self.vectors.to_jsonable(), indent=2, ensure_ascii=False),
            encoding="utf-8",
        )
        np.save(root / "vectors.npy", self.vectors.matrix())
        tables = {
            name: {
                "database": entry.database,
                "rows": [
                    {
                        "key": row.key.encode(),
                        "wkt": row.geometry.wkt(),
                        "name": row.name,
                        "category": row.category,
                    }
                    for row in entry.rows.values()
                ],
            }
            for name, entry in self._tables.items()
        }
        (root / "tables.json").write_text(
            json.dumps(tables, indent=2, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def load(cls, data_dir, embedder=None) -> "KnowledgeStore":
        from .geometry import parse_wkt

        root = Path(data_dir)
        store = cls(embedder)
        store.graph = SchemaGraph.from_jsonable(
            json.loads((root / "graph.json").read_text(encoding="utf-8"))
        )
        meta = json.loads((root / "vector_meta.json").read_text(encoding="utf-8"))
        matrix = np.load(root / "vectors.npy")
        for row, vector in zip(meta, matrix):
            store.vectors.add(VectorRecord(row["text"], row["kind"], row["table"]), vector)
        tables = json.loads((root / "tables.json").read_text(encoding="utf-8"))
        for name, payload in tables.items():
            entry = _Table(name, payload["database"])
            for raw in payload["rows"]:
                key = EntityKey.parse(raw["key"])
                entry.rows[key] = _Row(key, parse_wkt(raw["wkt"]), raw["name"], raw["category"])
            entry.rebuild()
            store._tables[name] = entry
            store._add_keyword(singular_phrase(name), KIND_TABLE, name, singular_phrase(name))
            for raw in payload["rows"]:
                if raw["category"]:
                    store._add_keyword(
                        singular_phrase(raw["category"]), KIND_CATEGORY, name, raw["category"]
                    )
                if raw["name"]:
                    store._add_keyword(
                        singular_phrase(raw["name"]), KIND_ENTRY_NAME, name, raw["name"]
                    )
        return store

    def digest(self) -> str:
        """Stable content hash across the three stores."""
        h = hashlib.sha256()
        h.update(json.dumps(self.graph.to_jsonable(), sort_keys=True).encode())
        h.update(json.dumps(self.vectors.to_jsonable(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.vectors.matrix()).tobytes())
        for name in sorted(self._tables):
            entry = self._tables[name]
            h.update(name.encode())
            for row in entry.rows.values():
                h.update(row.key.encode().encode())
                h.update(row.geometry.wkt().encode())
        return h.hexdigest()
