"""Spatial-relation canonicalization and two-sided relation filtering."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyInput, EmptyText, MalformedDecision
from .keys import GeoSet
from .llm import LLMGateway, ask_json
from .prompts import AgentRole
from .spatial import (
    BUFFER,
    SpatialIndex,
    SpatialOpSpec,
    meters_to_degree_margin,
    relate,
)
from .textnorm import normalize


@dataclass(frozen=True)
class FilterResult:
    """Both sides of a relation filter; each is a subset of its input."""

    subject: GeoSet
    object: GeoSet


def spec_from_payload(payload) -> SpatialOpSpec:
    """Validate the modify agent's JSON into a SpatialOpSpec."""
    if not isinstance(payload, dict):
        raise MalformedDecision(f"expected an object, got {type(payload).__name__}")
    spatial_type = str(payload.get("spatial_type", "")).strip().lower()
    num = payload.get("num")
    if isinstance(num, bool):
        raise MalformedDecision("num must be a number of meters")
    if isinstance(num, str):
        try:
            num = float(num)
        except ValueError:
            raise MalformedDecision(f"num must be a number of meters, got {num!r}")
    negation = payload.get("negation", False)
    if isinstance(negation, str):
        lowered = negation.strip().lower()
        if lowered not in ("true", "false"):
            raise MalformedDecision(f"negation must be true or false, got {negation!r}")
        negation = lowered == "true"
    if not isinstance(negation, bool):
        raise MalformedDecision(f"negation must be true or false, got {negation!r}")
    return SpatialOpSpec(spatial_type=spatial_type, num=num, negation=negation)


class RelationClassifier:
    """Asks the modify agent to canonicalize one relation phrase."""

    def __init__(self, gateway: LLMGateway):
        self.gateway = gateway

    def classify_relation(self, relation_text: str, session_id: str = "default") -> SpatialOpSpec:
        if not normalize(relation_text):
            raise EmptyText("empty relation text")
        payload, _ = ask_json(
            self.gateway, AgentRole.MODIFY_AGENT, relation_text, session_id
        )
        return spec_from_payload(payload)


def _margin(geom, spec: SpatialOpSpec) -> tuple:
    if spec.spatial_type != BUFFER:
        return (0.0, 0.0)
    box = geom.bbox()
    return meters_to_degree_margin(float(spec.num), box.center[0])


def geo_filter(spec: SpatialOpSpec, subject: GeoSet, object_set: GeoSet) -> FilterResult:
    """Filter both sides of a relation.

    A subject survives when it satisfies the (possibly negated) predicate
    against at least one object; an object survives when at least one kept
    subject relates to it. The spatial index prunes candidate pairs; exact
    predicates decide. Input order is preserved on both sides.
    """
    if len(subject) == 0:
        raise EmptyInput("subject")
    if len(object_set) == 0:
        raise EmptyInput("object")
    base = SpatialOpSpec(spec.spatial_type, spec.num, False)

    object_index = SpatialIndex(object_set)
    object_items = object_set.items()
    kept_subjects = GeoSet()
    for key, geom in subject.items():
        candidates = object_index.query_geometry(geom, _margin(geom, spec))
        hit = any(relate(geom, object_items[pos][1], base) for pos in candidates)
        if (not hit) if spec.negation else hit:
            kept_subjects.add(key, geom)

    kept_objects = GeoSet()
    if len(kept_subjects):
        subject_index = SpatialIndex(kept_subjects)
        subject_items = kept_subjects.items()
        total = len(kept_subjects)
        for key, geom in object_set.items():
            candidates = subject_index.query_geometry(geom, _margin(geom, spec))
            if spec.negation:
                # Kept subjects outside the candidate set cannot satisfy the
                # base predicate, so any shortfall proves a negated relation.
                if len(candidates) < total or any(
                    not relate(subject_items[pos][1], geom, base) for pos in candidates
                ):
                    kept_objects.add(key, geom)
            else:
                if any(
                    relate(subject_items[pos][1], geom, base) for pos in candidates
                ):
                    kept_objects.add(key, geom)
    return FilterResult(subject=kept_subjects, object=kept_objects)
