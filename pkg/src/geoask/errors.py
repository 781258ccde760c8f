"""Typed errors raised across the engine.

Every failure mode callers are expected to branch on gets its own class so
tests and the service layer can match on type instead of message text.
"""

from __future__ import annotations

from typing import Optional


class GeoAskError(Exception):
    """Base class for all engine errors."""


# --- geometry ---------------------------------------------------------------


class MalformedWkt(GeoAskError):
    """WKT text could not be parsed or failed coordinate validation."""

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"bad WKT at offset {position}: {reason}")


class UnsupportedKind(GeoAskError):
    """Geometry kind outside point/linestring/polygon/multipolygon."""

    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"unsupported geometry kind: {kind}")


class MissingDistance(GeoAskError):
    """Buffer operation requested without a positive distance."""


class KeyParseError(GeoAskError):
    """Entity key text does not follow the database_type_name_id layout."""


class DegenerateBox(GeoAskError):
    """Bounding box has zero extent along an axis."""


# --- agent runtime ----------------------------------------------------------


class BackendUnavailable(GeoAskError):
    """Chat or embedding backend unreachable after retries."""


class RateLimited(GeoAskError):
    """Backend kept answering 429 past the retry limit."""


class TranscriptMiss(GeoAskError):
    """Scripted transcript has no entry for (role, input digest)."""

    def __init__(self, role: str, digest: str, preview: str = ""):
        self.role = role
        self.digest = digest
        suffix = f" (input: {preview!r})" if preview else ""
        super().__init__(f"no scripted response for {role}/{digest[:12]}{suffix}")


class MissingSlot(GeoAskError):
    """Prompt template rendered without one of its declared slots."""

    def __init__(self, role: str, slot: str):
        self.role = role
        self.slot = slot
        super().__init__(f"template for {role} is missing slot {slot!r}")


class NoJsonFound(GeoAskError):
    """Agent reply contains no fenced block and is not itself JSON."""


class JsonSyntax(GeoAskError):
    """Fenced block found but its payload does not parse."""

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"bad JSON at offset {position}: {reason}")


class UnknownSession(GeoAskError):
    """Session id was never created on this gateway or service."""


# --- knowledge store --------------------------------------------------------


class NotFeatureCollection(GeoAskError):
    """Uploaded document is not a GeoJSON FeatureCollection."""


class EmptyText(GeoAskError):
    """Embedding requested for empty or whitespace-only text."""


class EmptyIndex(GeoAskError):
    """Similarity search against a store with no indexed vectors."""


class UnknownTable(GeoAskError):
    """Selector names a table the store does not contain."""

    def __init__(self, table: str):
        self.table = table
        super().__init__(f"unknown table: {table}")


# --- planner ----------------------------------------------------------------


class UnroutableResponse(GeoAskError):
    """Router reply names neither known receiver."""


class MalformedSpec(GeoAskError):
    """Relation analysis reply missing required structure."""


class UnplannableSpec(GeoAskError):
    """Relation spec cannot be realized as a whitelisted plan."""


class NoCodeFound(GeoAskError):
    """Planner reply contains no fenced code block."""


class NonWhitelistedCall(GeoAskError):
    """Plan line calls a function outside the registered tool set."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"call not whitelisted: {name}")


class CallSyntax(GeoAskError):
    """Plan line does not match the identifier(arguments) grammar."""

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"bad call at offset {position}: {reason}")


class UnknownVariable(GeoAskError):
    """Plan argument references a name no earlier step produced."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown variable: {name}")


class StepFailed(GeoAskError):
    """A plan step raised; carries the index, the cause, and finished steps."""

    def __init__(self, index: int, cause: Exception, completed=()):
        self.index = index
        self.cause = cause
        self.completed = tuple(completed)
        super().__init__(f"step {index} failed: {cause}")


# --- region selection -------------------------------------------------------


class PlaceNotFound(GeoAskError):
    """Geocoder returned no result for the place text."""


class GeocoderUnavailable(GeoAskError):
    """Geocoder endpoint unreachable or persistently erroring."""


class MalformedDirective(GeoAskError):
    """Region directive reply could not be interpreted."""


# --- data analysis ----------------------------------------------------------


class UnknownSpatialType(GeoAskError):
    """Spatial operation outside buffer/intersects/contains/within."""

    def __init__(self, value: str):
        self.value = value
        super().__init__(f"unknown spatial type: {value}")


class EmptyInput(GeoAskError):
    """Filter invoked with an empty subject or object set."""

    def __init__(self, side: str):
        self.side = side
        super().__init__(f"empty {side} set")


class MalformedDecision(GeoAskError):
    """Agent decision JSON parsed but violates its schema."""


# --- entity retrieval -------------------------------------------------------


class RewriteFailed(GeoAskError):
    """Imitation rewrite produced no usable query text."""


class EntityNotFound(GeoAskError):
    """Retrieval exhausted every stage without a single candidate."""

    def __init__(self, text: str):
        self.text = text
        super().__init__(f"no entities found for {text!r}")


# --- explainer --------------------------------------------------------------


class IterationLimit(GeoAskError):
    """Explainer loop hit its iteration cap without a final answer."""


class GraphQuerySyntax(GeoAskError):
    """Graph query text does not match the documented grammar."""

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"bad graph query at offset {position}: {reason}")


class UnsupportedFeature(GeoAskError):
    """Graph query uses a construct outside the documented subset."""


class UnknownEdgeType(GeoAskError):
    """Graph query names an edge type absent from the schema graph."""

    def __init__(self, edge_type: str):
        self.edge_type = edge_type
        super().__init__(f"unknown edge type: {edge_type}")


class EmptyValues(GeoAskError):
    """Histogram requested over an empty value list."""


# --- evaluation -------------------------------------------------------------


class InsufficientData(GeoAskError):
    """Case generator could not fill the requested count from the fixture."""


# --- runtime configuration ----------------------------------------------------


class BadConfig(GeoAskError):
    """Settings file or environment override could not be applied."""


def error_code(exc: Exception) -> str:
    """Stable machine-readable code for an error instance."""
    return type(exc).__name__


def describe(exc: Exception, limit: Optional[int] = 300) -> str:
    """Single-line error description, truncated for transport."""
    text = f"{error_code(exc)}: {exc}"
    if limit is not None and len(text) > limit:
        text = text[: limit - 3] + "..."
    return text
