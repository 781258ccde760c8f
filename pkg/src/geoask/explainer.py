"""Descriptive answers, chart specifications, and schema-graph queries.

The explainer agent may ask the system to run a constrained graph query
(fenced ``cypher`` block) or to draw a histogram (fenced ``json`` action).
Nothing the agent writes is executed as code: queries go through a
single-pattern parser and charts come back as declarative specs the UI
renders.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .analyzer import FilterResult
from .errors import (
    EmptyValues,
    GraphQuerySyntax,
    IterationLimit,
    UnknownEdgeType,
    UnsupportedFeature,
    describe,
)
from .geometry import geometry_area_m2
from .keys import GeoSet
from .llm import CompletionRequest, LLMGateway, extract_json, last_fenced_block
from .prompts import AgentRole, render_prompt
from .store import KnowledgeStore

MAX_ITERATIONS = 5
RESULT_MARKER = "Explain result"

CHART_VERSION = 1


@dataclass(frozen=True)
class ChartSpec:
    """Declarative histogram the UI renders; no code crosses this boundary."""

    bin_edges: Tuple[float, ...]
    counts: Tuple[int, ...]
    title: str = ""
    x_label: str = ""
    kind: str = "histogram"
    version: int = CHART_VERSION

    def __post_init__(self):
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ValueError("counts length must be bin_edges length - 1")
        for earlier, later in zip(self.bin_edges, self.bin_edges[1:]):
            if not later > earlier:
                raise ValueError("bin edges must ascend")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    def to_jsonable(self) -> dict:
        return {
            "version": self.version,
            "kind": self.kind,
            "bin_edges": [float(e) for e in self.bin_edges],
            "counts": [int(c) for c in self.counts],
            "title": self.title,
            "x_label": self.x_label,
        }


@dataclass(frozen=True)
class ExplainResult:
    """Final explainer output: prose, a chart, or formatted query rows."""

    kind: str  # text | chart | table
    text: str
    payload: object = None
    queries: Tuple[Tuple[str, tuple], ...] = ()


# --- histogram ---------------------------------------------------------------


def sturges_bins(n: int) -> int:
    return max(1, math.ceil(math.log2(n)) + 1) if n > 1 else 1


def make_histogram(
    values: Sequence[float],
    bins: Optional[int] = None,
    title: str = "",
    x_label: str = "",
) -> ChartSpec:
    """Equal-width histogram; half-open intervals, last one closed."""
    data = [float(v) for v in values]
    if not data:
        raise EmptyValues("histogram over no values")
    if bins is None:
        bins = sturges_bins(len(data))
    if bins < 1:
        raise ValueError(f"bin count must be positive, got {bins}")
    lo, hi = min(data), max(data)
    if hi == lo:
        hi = lo + 1.0
    counts, edges = np.histogram(data, bins=bins, range=(lo, hi))
    return ChartSpec(
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
        title=title,
        x_label=x_label,
    )


# --- graph queries -----------------------------------------------------------


@dataclass(frozen=True)
class NodeSpec:
    var: str
    type: Optional[str] = None
    id: Optional[str] = None

    def serialize(self) -> str:
        props = []
        if self.type is not None:
            props.append(f"type:'{self.type}'")
        if self.id is not None:
            props.append(f"id:'{self.id}'")
        inner = f" {{{', '.join(props)}}}" if props else ""
        return f"({self.var}{inner})"


@dataclass(frozen=True)
class EdgeSpec:
    edge_type: str
    var: str = ""

    def serialize(self) -> str:
        return f"-[{self.var}:{self.edge_type}]->"


@dataclass(frozen=True)
class Projection:
    var: str
    attribute: str  # "type" or "id"

    def serialize(self) -> str:
        return f"{self.var}.{self.attribute}"


@dataclass(frozen=True)
class GraphQuery:
    start: NodeSpec
    projections: Tuple[Projection, ...]
    edge: Optional[EdgeSpec] = None
    end: Optional[NodeSpec] = None

    def serialize(self) -> str:
        pattern = self.start.serialize()
        if self.edge is not None:
            pattern += self.edge.serialize() + self.end.serialize()
        returns = ", ".join(p.serialize() for p in self.projections)
        return f"MATCH {pattern} RETURN {returns}"


_UNSUPPORTED_KEYWORDS = ("where", "order by", "limit", "with", "create", "delete", "set ")
_AGGREGATES = ("count(", "collect(", "sum(", "avg(", "min(", "max(")

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_NODE_RE = re.compile(
    rf"\(\s*(?P<var>{_IDENT})?\s*(?:\{{(?P<props>[^}}]*)\}})?\s*\)"
)
_EDGE_RE = re.compile(rf"-\s*\[\s*(?P<var>{_IDENT})?\s*:\s*(?P<type>{_IDENT})\s*\]\s*->")
_PROP_RE = re.compile(rf"(?P<key>{_IDENT})\s*:\s*(?P<q>['\"])(?P<value>[^'\"]*)(?P=q)")
_RETURN_RE = re.compile(rf"(?P<var>{_IDENT})\s*\.\s*(?P<attr>{_IDENT})")


def _parse_props(text: str, base: int) -> dict:
    props = {}
    rest = text.strip()
    if not rest:
        return props
    for chunk in rest.split(","):
        piece = chunk.strip()
        if not piece:
            raise GraphQuerySyntax(base, "empty property")
        m = _PROP_RE.fullmatch(piece)
        if m is None:
            raise GraphQuerySyntax(base, f"bad property {piece!r}")
        key = m.group("key").lower()
        if key not in ("type", "id"):
            raise GraphQuerySyntax(base, f"unknown property {key!r}")
        if key in props:
            raise GraphQuerySyntax(base, f"duplicate property {key!r}")
        props[key] = m.group("value")
    return props


def _parse_node(text: str, pos: int, fallback_var: str) -> Tuple[NodeSpec, int]:
    m = _NODE_RE.match(text, pos)
    if m is None:
        raise GraphQuerySyntax(pos, "expected a (node) pattern")
    props = _parse_props(m.group("props") or "", m.start())
    var = m.group("var") or fallback_var
    return NodeSpec(var, props.get("type"), props.get("id")), m.end()


def parse_graph_query(text: str) -> GraphQuery:
    """Parse ``MATCH (a {...})[-[r:edge]->(b {...})] RETURN a.attr, ...``.

    Single pattern, at most one hop, attribute projections only. Anything
    past that subset raises UnsupportedFeature so the agent can rephrase.
    """
    query = text.strip().rstrip(";")
    lowered = query.lower()
    for keyword in _UNSUPPORTED_KEYWORDS:
        if keyword in lowered:
            raise UnsupportedFeature(f"{keyword.strip().upper()} is not supported")
    for fn in _AGGREGATES:
        if fn in lowered.replace(" ", ""):
            raise UnsupportedFeature(f"aggregation {fn.rstrip('(')}() is not supported")
    if "<-" in query:
        raise UnsupportedFeature("only forward arrows; use a _reverse edge type")
    if query.count("->") > 1:
        raise UnsupportedFeature("at most one hop per query")
    if lowered.count("match") > 1:
        raise UnsupportedFeature("a single MATCH clause is supported")
    if not lowered.startswith("match"):
        raise GraphQuerySyntax(0, "query must start with MATCH")
    return_at = lowered.rfind("return")
    if return_at < 0:
        raise GraphQuerySyntax(len(query), "missing RETURN clause")
    pattern = query[len("match") : return_at].strip()
    returns = query[return_at + len("return") :].strip()

    start, consumed = _parse_node(pattern, 0, "a")
    edge = None
    end = None
    rest = pattern[consumed:].strip()
    if rest:
        offset = len(pattern) - len(rest)
        m = _EDGE_RE.match(rest)
        if m is None:
            raise GraphQuerySyntax(offset, f"expected -[:edge_type]->, got {rest!r}")
        edge = EdgeSpec(m.group("type"), m.group("var") or "")
        end, node_end = _parse_node(rest, m.end(), "b")
        tail = rest[node_end:].strip()
        if tail:
            if tail.startswith("-"):
                raise UnsupportedFeature("at most one hop per query")
            raise GraphQuerySyntax(offset + node_end, f"unexpected trailing {tail!r}")
    if start.var == (end.var if end else None):
        raise GraphQuerySyntax(0, "pattern variables must be distinct")

    if not returns:
        raise GraphQuerySyntax(return_at, "empty RETURN clause")
    declared = {start.var} | ({end.var} if end else set())
    projections: List[Projection] = []
    for chunk in returns.split(","):
        piece = chunk.strip()
        m = _RETURN_RE.fullmatch(piece)
        if m is None:
            raise GraphQuerySyntax(return_at, f"projections must be var.attribute, got {piece!r}")
        var, attr = m.group("var"), m.group("attr").lower()
        if var not in declared:
            raise GraphQuerySyntax(return_at, f"unknown pattern variable {var!r}")
        if attr not in ("type", "id"):
            raise GraphQuerySyntax(return_at, f"nodes only carry type and id, got {attr!r}")
        projections.append(Projection(var, attr))
    return GraphQuery(start, tuple(projections), edge, end)


def _matches(ref: Tuple[str, str], spec: NodeSpec) -> bool:
    node_type, node_id = ref
    if spec.type is not None and node_type != spec.type:
        return False
    if spec.id is not None and node_id != spec.id:
        return False
    return True


def run_graph_query(query: GraphQuery, graph) -> list:
    """Evaluate against a schema graph; rows follow node insertion order.

    A single projection yields a flat value list; several yield row lists.
    """
    if query.edge is not None and query.edge.edge_type not in graph.edge_types():
        raise UnknownEdgeType(query.edge.edge_type)
    bindings: List[dict] = []
    for ref in graph.nodes():
        if not _matches(ref, query.start):
            continue
        if query.edge is None:
            bindings.append({query.start.var: ref})
            continue
        for target in graph.out_edges(ref, query.edge.edge_type):
            if _matches(target, query.end):
                bindings.append({query.start.var: ref, query.end.var: target})
    rows = []
    for binding in bindings:
        row = []
        for proj in query.projections:
            node_type, node_id = binding[proj.var]
            row.append(node_type if proj.attribute == "type" else node_id)
        rows.append(row[0] if len(query.projections) == 1 else row)
    return rows


# --- the explainer loop ------------------------------------------------------


def variables_listing(session) -> str:
    """Deterministic description of session variables for the system prompt."""
    variables = getattr(session, "variables", {})
    if not variables:
        return "(no variables yet)"
    lines = []
    for name, value in variables.items():
        if isinstance(value, GeoSet):
            lines.append(f"{name}: id_list with {len(value)} entities")
        elif isinstance(value, FilterResult):
            lines.append(
                f"{name}: geo_filter result (subject {len(value.subject)}, "
                f"object {len(value.object)})"
            )
        else:
            lines.append(f"{name}: {type(value).__name__}")
    return "\n".join(lines)


def _chart_action(text: str) -> Optional[dict]:
    try:
        payload = extract_json(text)
    except Exception:
        return None
    if isinstance(payload, dict) and payload.get("action") == "chart":
        return payload
    return None


def _marker_only(text: str) -> bool:
    residue = text.strip().strip('"').strip()
    return residue.rstrip(".!").strip().lower() == RESULT_MARKER.lower()


def format_rows(rows: Sequence) -> str:
    lines = []
    for pos, row in enumerate(rows, start=1):
        value = ", ".join(str(v) for v in row) if isinstance(row, list) else str(row)
        lines.append(f"{pos}. {value}")
    return "\n".join(lines)


class Explainer:
    """Iterative answer loop over session variables and the schema graph."""

    def __init__(self, gateway: LLMGateway, store: KnowledgeStore):
        self.gateway = gateway
        self.store = store

    def explain(self, prompt: str, session) -> ExplainResult:
        system = render_prompt(
            AgentRole.EXPLAINER, {"variables": variables_listing(session)}
        )
        context: List[Tuple[str, str]] = list(getattr(session, "history", ()))[-6:]
        session_id = getattr(session, "session_id", "default")
        user = prompt
        executed: List[Tuple[str, tuple]] = []
        last_rows: Optional[list] = None
        for _ in range(MAX_ITERATIONS):
            request = CompletionRequest(
                role=AgentRole.EXPLAINER,
                user_content=user,
                context=tuple(context),
                system=system,
            )
            response = self.gateway.complete(request, session_id)
            text = response.text
            cypher = last_fenced_block(text, "cypher")
            if cypher is not None:
                context.append(("assistant", text))
                try:
                    query = parse_graph_query(cypher)
                    rows = run_graph_query(query, self.store.graph)
                except (GraphQuerySyntax, UnsupportedFeature, UnknownEdgeType) as exc:
                    user = f"Query failed: {describe(exc)}"
                    context.append(("user", user))
                    continue
                executed.append((query.serialize(), tuple(tuple(r) if isinstance(r, list) else (r,) for r in rows)))
                last_rows = rows
                user = f"Query result: {json.dumps(rows)}"
                context.append(("user", user))
                continue
            action = _chart_action(text)
            if action is not None:
                chart, problem = self._build_chart(action, session)
                if problem is not None:
                    context.append(("assistant", text))
                    user = f"Chart failed: {problem}"
                    context.append(("user", user))
                    continue
                return ExplainResult("chart", text, chart, tuple(executed))
            if last_rows is not None and _marker_only(text):
                return ExplainResult("table", format_rows(last_rows), last_rows, tuple(executed))
            return ExplainResult("text", text, None, tuple(executed))
        raise IterationLimit(f"no final answer after {MAX_ITERATIONS} iterations")

    def _build_chart(self, action: dict, session):
        """ChartSpec from a chart action, or (None, problem) to feed back."""
        if action.get("kind") != "histogram":
            return None, f"unsupported chart kind {action.get('kind')!r}"
        name = action.get("variable")
        variables = getattr(session, "variables", {})
        value = variables.get(name)
        if value is None:
            available = ", ".join(variables) or "none"
            return None, f"unknown variable {name!r}; available: {available}"
        if isinstance(value, FilterResult):
            value = value.subject
        if not isinstance(value, GeoSet):
            return None, f"variable {name!r} is not an id_list"
        measure = action.get("measure", "area")
        if measure != "area":
            return None, f"unsupported measure {measure!r}"
        values = [geometry_area_m2(geom) for _, geom in value.items()]
        if not values:
            return None, f"variable {name!r} holds no geometries"
        bins = action.get("bins")
        if bins is not None and (isinstance(bins, bool) or not isinstance(bins, int)):
            return None, f"bins must be an integer, got {bins!r}"
        chart = make_histogram(
            values,
            bins=bins,
            title=str(action.get("title", "")),
            x_label=str(action.get("x_label", "")),
        )
        return chart, None
