"""Entity retrieval: keyword match, intent match, similarity, quality
check, and imitation rewrite, ending in query-code generation."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import (
    EmptyIndex,
    EntityNotFound,
    MalformedDecision,
    RewriteFailed,
)
from .geometry import BoundingBox
from .keys import GeoSet
from .llm import LLMGateway, ask_json
from .prompts import AgentRole, render_prompt
from .store import (
    CandidateMatch,
    KIND_CATEGORY,
    KIND_ENTRY_NAME,
    KIND_TABLE,
    KnowledgeStore,
)
from .textnorm import normalize, singular_phrase

EXACT = "Exact"
PARTIAL = "Partial"
NONE = "None"

STAGES = (
    "schema_match",
    "intent_match",
    "similarity_match",
    "quality_check",
    "imitation_rewrite",
)


def candidate_label(candidate: Tuple[str, str, str]) -> str:
    kind, table, value = candidate
    if kind == KIND_TABLE:
        return f"table:{table}"
    if kind == KIND_CATEGORY:
        return f"category:{value}"
    return f"name:{value}"


@dataclass(frozen=True)
class MatchOutcome:
    case: str
    candidates: Tuple[Tuple[str, str, str], ...]

    def labels(self) -> List[str]:
        return [candidate_label(c) for c in self.candidates]


@dataclass(frozen=True)
class IntentDecision:
    named_entity: bool
    valid_pairs: Tuple[Tuple[str, str, str], ...]
    table: str = ""


@dataclass
class StageRecord:
    stage: str
    status: str
    detail: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {"stage": self.stage, "status": self.status, "detail": self.detail}


class RetrievalTrace:
    """The five pipeline stages, in order, each ran or skipped."""

    def __init__(self):
        self.stages: List[StageRecord] = []

    def record(self, stage: str, status: str, **detail) -> None:
        expected = STAGES[len(self.stages)]
        if stage != expected:
            raise ValueError(f"stage {stage!r} out of order, expected {expected!r}")
        self.stages.append(StageRecord(stage, status, dict(detail)))

    def stage(self, name: str) -> StageRecord:
        for record in self.stages:
            if record.stage == name:
                return record
        raise KeyError(name)

    def to_jsonable(self) -> List[dict]:
        return [record.to_jsonable() for record in self.stages]

    @classmethod
    def from_jsonable(cls, payload: Iterable[dict]) -> "RetrievalTrace":
        trace = cls()
        for row in payload:
            trace.record(row["stage"], row["status"], **row.get("detail", {}))
        return trace


def intent_user(entity_text: str, labels: Sequence[str]) -> str:
    """User message for the intent-matching agent."""
    return f'query: "{entity_text}"\nmatched: {json.dumps(list(labels))}'


def quality_user(entity_text: str, values: Sequence[str]) -> str:
    """User message for the quality-check agent."""
    return f'description: "{entity_text}"\ncandidates: {json.dumps(list(values))}'


def rewrite_user(entity_text: str, samples: Sequence[str]) -> str:
    """User message for the imitation-rewrite agent."""
    return f'description: "{entity_text}"\nsamples: {json.dumps(list(samples))}'


def _box_key(box: Optional[BoundingBox]) -> Optional[tuple]:
    if box is None:
        return None
    return tuple(round(v, 6) for v in box.as_list())


class EntityRetriever:
    """Implements the staged retrieval workflow over a knowledge store."""

    def __init__(
        self,
        store: KnowledgeStore,
        gateway: LLMGateway,
        max_candidates: int = 50,
        similarity_floor: float = 0.2,
        cross_kind_floor: float = 0.5,
    ):
        self.store = store
        self.gateway = gateway
        self.max_candidates = max_candidates
        self.similarity_floor = similarity_floor
        self.cross_kind_floor = cross_kind_floor
        self._cache = {}
        self._cache_lock = threading.Lock()

    # -- stage 1: keyword matching -----------------------------------------

    def initial_match(self, entity_text: str) -> MatchOutcome:
        exact = self.store.exact_keyword(entity_text)
        if exact:
            return MatchOutcome(EXACT, tuple(exact))
        partial = self.store.keyword_lookup(entity_text)
        if partial:
            return MatchOutcome(PARTIAL, tuple(partial))
        return MatchOutcome(NONE, ())

    # -- stage 2: intent matching -------------------------------------------

    def intent_match(
        self, entity_text: str, outcome: MatchOutcome, session_id: str = "default"
    ) -> IntentDecision:
        system = render_prompt(
            AgentRole.INTENT_MATCHER, {"tables": json.dumps(self.store.tables())}
        )
        user = intent_user(entity_text, outcome.labels())
        payload, _ = ask_json(
            self.gateway, AgentRole.INTENT_MATCHER, user, session_id, system=system
        )
        if not isinstance(payload, dict):
            raise MalformedDecision(f"expected an object, got {type(payload).__name__}")
        named = payload.get("named_entity")
        if isinstance(named, str):
            named = named.strip().lower() == "true"
        if not isinstance(named, bool):
            raise MalformedDecision(f"named_entity must be true or false, got {named!r}")
        raw_pairs = payload.get("valid_pairs", [])
        if not isinstance(raw_pairs, list):
            raise MalformedDecision("valid_pairs must be a list")
        by_label = {candidate_label(c): c for c in outcome.candidates}
        valid = []
        for item in raw_pairs:
            if isinstance(item, str):
                hit = by_label.get(item)
            elif isinstance(item, (list, tuple)) and len(item) == 3:
                hit = tuple(item) if tuple(item) in outcome.candidates else None
            else:
                hit = None
            if hit is not None and hit not in valid:
                valid.append(hit)
        table = payload.get("table", "")
        if not isinstance(table, str) or table not in self.store.tables():
            table = ""
        return IntentDecision(named_entity=named, valid_pairs=tuple(valid), table=table)

    # -- stage 3: similarity ------------------------------------------------

    def similarity_stage(
        self, entity_text: str, decision: IntentDecision
    ) -> List[CandidateMatch]:
        scope = decision.table or None
        if decision.named_entity:
            plans = [
                ({KIND_ENTRY_NAME}, self.similarity_floor),
                ({KIND_CATEGORY}, self.cross_kind_floor),
            ]
        else:
            plans = [
                ({KIND_CATEGORY}, self.similarity_floor),
                ({KIND_ENTRY_NAME}, self.cross_kind_floor),
            ]
        merged: List[CandidateMatch] = []
        missing = 0
        for kinds, floor in plans:
            try:
                merged.extend(
                    self.store.similarity_search(
                        entity_text,
                        k=self.max_candidates,
                        scope=scope,
                        kinds=kinds,
                        min_score=floor,
                    )
                )
            except EmptyIndex:
                missing += 1
        if missing == len(plans):
            raise EmptyIndex(f"no indexed values in scope {scope!r}")
        merged.sort(key=lambda m: (-m.score, m.value))
        return merged[: self.max_candidates]

    # -- stage 4: quality check ----------------------------------------------

    def quality_check(
        self,
        entity_text: str,
        candidates: Sequence[CandidateMatch],
        session_id: str = "default",
    ) -> List[CandidateMatch]:
        if not candidates:
            return []
        values = [c.value for c in candidates]
        user = quality_user(entity_text, values)
        payload, _ = ask_json(
            self.gateway, AgentRole.QUALITY_CHECKER, user, session_id
        )
        if not isinstance(payload, dict) or not isinstance(payload.get("valid"), list):
            raise MalformedDecision("quality check must return {'valid': [...]}")
        accepted = {v for v in payload["valid"] if isinstance(v, str)}
        return [c for c in candidates if c.value in accepted]

    # -- stage 5: imitation rewrite -------------------------------------------

    def imitation_rewrite(
        self, entity_text: str, table: str, session_id: str = "default"
    ) -> str:
        samples = self.store.sample_values(table, KIND_ENTRY_NAME, limit=20)
        user = rewrite_user(entity_text, samples)
        payload, _ = ask_json(
            self.gateway, AgentRole.IMITATION_REWRITER, user, session_id
        )
        if not isinstance(payload, dict):
            raise MalformedDecision(f"expected an object, got {type(payload).__name__}")
        rewritten = payload.get("rewritten", "")
        if not isinstance(rewritten, str) or not rewritten.strip():
            raise RewriteFailed(f"no rewrite produced for {entity_text!r}")
        return rewritten.strip()

    # -- query-code generation -------------------------------------------------

    def generate_query(
        self, candidates: Iterable, box: Optional[BoundingBox] = None
    ) -> GeoSet:
        result = GeoSet()
        for candidate in candidates:
            if isinstance(candidate, CandidateMatch):
                kind, table, value = candidate.kind, candidate.table, candidate.value
            else:
                kind, table, value = candidate
            if kind == KIND_TABLE:
                got = self.store.get_geometries(table, box=box)
            elif kind == KIND_CATEGORY:
                got = self.store.get_geometries(table, category=value, box=box)
            else:
                got = self.store.get_geometries(table, names={value}, box=box)
            result = result.union(got)
        return result

    # -- orchestration -----------------------------------------------------------

    def retrieve(
        self,
        entity_text: str,
        box: Optional[BoundingBox] = None,
        session_id: str = "default",
    ) -> Tuple[GeoSet, RetrievalTrace]:
        cache_key = (normalize(entity_text), _box_key(box))
        with self._cache_lock:
            hit = self._cache.get(cache_key)
        if hit is not None:
            items, trace_payload = hit
            return GeoSet(items), RetrievalTrace.from_jsonable(trace_payload)

        trace = RetrievalTrace()
        outcome = self.initial_match(entity_text)
        trace.record(
            "schema_match", "ran", case=outcome.case, candidates=outcome.labels()
        )

        if outcome.case == EXACT:
            for stage in STAGES[1:]:
                trace.record(stage, "skipped")
            result = self.generate_query(outcome.candidates, box)
            return self._finish(cache_key, result, trace)

        decision = self.intent_match(entity_text, outcome, session_id)
        trace.record(
            "intent_match",
            "ran",
            mode="Name-focused" if decision.named_entity else "Category-focused",
            named_entity=decision.named_entity,
            valid=[candidate_label(c) for c in decision.valid_pairs],
            table=decision.table,
        )

        similar = self.similarity_stage(entity_text, decision)
        trace.record(
            "similarity_match", "ran", candidates=[c.value for c in similar]
        )

        if similar:
            kept = self.quality_check(entity_text, similar, session_id)
            trace.record("quality_check", "ran", valid=[c.value for c in kept])
        else:
            kept = []
            trace.record("quality_check", "skipped")

        validated = [c for c in decision.valid_pairs if c[0] != KIND_TABLE]
        final: List = list(validated)
        for match in kept:
            triple = (match.kind, match.table, match.value)
            if triple not in final:
                final.append(match)

        if final:
            trace.record("imitation_rewrite", "skipped")
            result = self.generate_query(final, box)
            return self._finish(cache_key, result, trace)

        if not decision.table:
            trace.record("imitation_rewrite", "skipped")
            raise EntityNotFound(entity_text)

        rewritten = self.imitation_rewrite(entity_text, decision.table, session_id)
        second = self.similarity_stage(
            rewritten, IntentDecision(decision.named_entity, (), decision.table)
        )
        trace.record(
            "imitation_rewrite",
            "ran",
            rewritten=rewritten,
            second_pass=[c.value for c in second],
        )
        if not second:
            raise EntityNotFound(entity_text)
        result = self.generate_query(second, box)
        return self._finish(cache_key, result, trace)

    def _finish(
        self, cache_key, result: GeoSet, trace: RetrievalTrace
    ) -> Tuple[GeoSet, RetrievalTrace]:
        with self._cache_lock:
            self._cache[cache_key] = (tuple(result.items()), trace.to_jsonable())
        return result, trace
