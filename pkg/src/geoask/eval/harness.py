"""Seeded case generation, a brute-force geometry oracle, template
paraphrasing, and end-to-end precision/recall/accuracy reporting."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..analyzer import geo_filter
from ..engine import Engine
from ..errors import BadConfig, GeoAskError, InsufficientData
from ..keys import GeoSet
from ..llm import ScriptedGateway, TokenUsage, Transcript, ask_json
from ..planner import RelationSpec, SpatialRelation
from ..prompts import AgentRole
from ..region import FixtureGeocoder
from ..retriever import rewrite_user
from ..spatial import (
    BUFFER,
    SPATIAL_TYPES,
    SpatialOpSpec,
    meters_to_degree_margin,
    relate,
)
from ..store import KIND_CATEGORY, KnowledgeStore
from .fixtures import build_store, fixture_places, synthetic_city
from .scripting import analyzer_query_entries, record_all, relation_reply

BUFFER_DISTANCES = (100.0, 200.0, 500.0)

# tier number -> (entity count, name modifiers)
TIERS: Dict[int, Tuple[int, bool]] = {
    1: (2, False),
    2: (2, True),
    3: (3, True),
    4: (4, True),
}
_TIER_BY_SHAPE = {shape: tier for tier, shape in TIERS.items()}


@dataclass(frozen=True)
class CaseEntity:
    """One queried entity: its table, category, and optional name modifier."""

    table: str
    category: str
    name: str = ""

    def phrase(self) -> str:
        return self.name or self.category


@dataclass(frozen=True)
class CaseRelation:
    text: str
    op: SpatialOpSpec
    subject: int
    object: int


@dataclass(frozen=True)
class EvalCase:
    tier: int
    entities: Tuple[CaseEntity, ...]
    relations: Tuple[CaseRelation, ...]
    nl_query: str
    truth_keys: frozenset


@dataclass(frozen=True)
class CaseConfig:
    n_entities: int
    named: bool
    count: int
    seed: int


def relation_text(op: SpatialOpSpec) -> str:
    if op.spatial_type == BUFFER:
        return f"within {int(op.num)} meters of"
    return op.spatial_type


def entity_geoset(store: KnowledgeStore, entity: CaseEntity) -> GeoSet:
    names = {entity.name} if entity.name else None
    return store.get_geometries(entity.table, category=entity.category, names=names)


# --- oracle ---------------------------------------------------------------


def _relation_holds(geom, objects: GeoSet, op: SpatialOpSpec) -> bool:
    base = SpatialOpSpec(op.spatial_type, op.num, False)
    box = geom.bbox()
    if op.spatial_type == BUFFER:
        dlat, dlon = meters_to_degree_margin(float(op.num), box.center[0])
        box = box.expand(dlat, dlon)
    hit = any(
        relate(geom, obj_geom, base)
        for _, obj_geom in objects.items()
        if box.intersects(obj_geom.bbox())
    )
    return (not hit) if op.negation else hit


def oracle(
    store: KnowledgeStore,
    entities: Sequence[CaseEntity],
    relations: Sequence[CaseRelation],
) -> frozenset:
    """Index-free ground truth: subject keys satisfying every relation.

    Naive pairwise evaluation with relate(). The only shortcut is an exact
    bounding-box pre-test (expanded by the buffer margin) which can never
    change a predicate outcome, only skip pairs that are provably false.
    """
    sets = [entity_geoset(store, entity) for entity in entities]
    truth = set()
    for key, geom in sets[0].items():
        if all(_relation_holds(geom, sets[rel.object], rel.op) for rel in relations):
            truth.add(key)
    return frozenset(truth)


# --- paraphrasing -----------------------------------------------------------


def plural(word: str) -> str:
    return word if word.endswith("s") else word + "s"


def _plural_np(entity: CaseEntity) -> str:
    if entity.name:
        return f"the {entity.category} named {entity.name}"
    return plural(entity.category)


def _the_np(entity: CaseEntity) -> str:
    if entity.name:
        return f"the {entity.category} named {entity.name}"
    return f"the {entity.category}"


def _object_np(entity: CaseEntity) -> str:
    if entity.name:
        return f"the {entity.category} named {entity.name}"
    return f"a {entity.category}"


_RELATION_VERBS = {
    "contains": ("that contains", "that contain"),
    "within": ("that lies within", "that lie within"),
    "intersects": ("that intersects", "that intersect"),
}


def relation_clause(rel: CaseRelation, obj: CaseEntity, plural: bool = False) -> str:
    if rel.op.spatial_type == BUFFER:
        return f"within {int(rel.op.num)} meters of {_object_np(obj)}"
    verb = _RELATION_VERBS[rel.op.spatial_type][1 if plural else 0]
    return f"{verb} {_object_np(obj)}"


def _clauses(
    entities: Sequence[CaseEntity],
    relations: Sequence[CaseRelation],
    plural: bool = False,
) -> str:
    parts = [relation_clause(rel, entities[rel.object], plural) for rel in relations]
    joined = parts[0]
    for part in parts[1:]:
        joined += f", as well as {part}"
    return joined


def frame_bare(entities: Sequence[CaseEntity], relations: Sequence[CaseRelation]) -> str:
    subject = entities[0]
    return f"{_plural_np(subject)} {_clauses(entities, relations, not subject.name)}"


def frame_show(entities: Sequence[CaseEntity], relations: Sequence[CaseRelation]) -> str:
    return f"Can you show me {_the_np(entities[0])} {_clauses(entities, relations)}?"


def frame_find(entities: Sequence[CaseEntity], relations: Sequence[CaseRelation]) -> str:
    subject = entities[0]
    return f"Find {_plural_np(subject)} {_clauses(entities, relations, not subject.name)}."


def frame_map(entities: Sequence[CaseEntity], relations: Sequence[CaseRelation]) -> str:
    subject = entities[0]
    clauses = _clauses(entities, relations, not subject.name)
    return f"Show me {_plural_np(subject)} {clauses} on the map."


def frame_curious(entities: Sequence[CaseEntity], relations: Sequence[CaseRelation]) -> str:
    return f"I am curious about {_the_np(entities[0])} {_clauses(entities, relations)}."


TEMPLATE_FRAMES = (frame_bare, frame_show, frame_find, frame_map, frame_curious)


def paraphrase(
    entities: Sequence[CaseEntity],
    relations: Sequence[CaseRelation],
    seed: int = 0,
    mode: str = "template",
    gateway=None,
    session_id: str = "eval",
) -> str:
    """Render a case as a natural-language question.

    "exact" keeps the bare canonical wording, "template" picks a seeded
    surface form from a fixed grammar, and "live" asks the rewrite agent
    for a free paraphrase (falling back to the canonical wording when the
    reply is unusable).
    """
    if mode == "exact":
        return frame_bare(entities, relations)
    if mode == "template":
        rng = random.Random(seed)
        frame = rng.choice(TEMPLATE_FRAMES)
        return frame(entities, relations)
    if mode == "live":
        if gateway is None:
            raise BadConfig("live paraphrase needs a gateway")
        core = frame_bare(entities, relations)
        samples = [frame_show(entities, relations), frame_map(entities, relations)]
        payload, _ = ask_json(
            gateway, AgentRole.IMITATION_REWRITER, rewrite_user(core, samples), session_id
        )
        rewritten = payload.get("rewritten", "") if isinstance(payload, dict) else ""
        rewritten = str(rewritten).strip()
        return rewritten or core
    raise BadConfig(f"unknown paraphrase mode: {mode!r}")


# --- case generation ---------------------------------------------------------


def category_pool(store: KnowledgeStore) -> List[Tuple[str, str]]:
    pool = []
    for table in store.tables():
        for category in store.sample_values(table, KIND_CATEGORY, limit=50):
            pool.append((table, category))
    return pool


def _named_geoset(store: KnowledgeStore, table: str, category: str) -> GeoSet:
    out = GeoSet()
    for key, geom in store.get_geometries(table, category=category).items():
        if key.name != "unnamed":
            out.add(key, geom)
    return out


def _draw_op(rng: random.Random) -> SpatialOpSpec:
    spatial_type = rng.choice(SPATIAL_TYPES)
    if spatial_type == BUFFER:
        return SpatialOpSpec(BUFFER, rng.choice(BUFFER_DISTANCES), False)
    return SpatialOpSpec(spatial_type, None, False)


def _draw_plain(rng, store, pool, n_entities):
    subject_tc = rng.choice(pool)
    others = [tc for tc in pool if tc != subject_tc]
    if len(others) < n_entities - 1:
        return None
    object_tcs = rng.sample(others, n_entities - 1)
    entities = [CaseEntity(t, c) for t, c in [subject_tc] + object_tcs]
    current = entity_geoset(store, entities[0])
    if len(current) == 0:
        return None
    relations = []
    for index, entity in enumerate(entities[1:], start=1):
        op = _draw_op(rng)
        objects = entity_geoset(store, entity)
        if len(objects) == 0:
            return None
        # Indexed filter as a cheap viability probe; truth is recomputed
        # index-free by the oracle afterwards.
        survivors = geo_filter(op, current, objects).subject
        if len(survivors) == 0:
            return None
        current = survivors
        relations.append(CaseRelation(relation_text(op), op, 0, index))
    return entities, relations


def _draw_named(rng, store, pool, n_entities, cache=None):
    if cache is None:
        cache = {}

    def named(tc):
        if tc not in cache:
            cache[tc] = _named_geoset(store, *tc)
        return cache[tc]

    subject_tc = rng.choice(pool)
    subjects = named(subject_tc)
    if len(subjects) == 0:
        return None
    subject_key = rng.choice(subjects.keys())
    subject_geom = subjects.get(subject_key)
    entities = [CaseEntity(subject_tc[0], subject_tc[1], subject_key.name)]
    used = {(subject_tc[0], subject_tc[1], subject_key.name)}
    relations = []
    for index in range(1, n_entities):
        # The fixed subject makes most (op, object class) draws unsatisfiable,
        # so retry the draw before abandoning the whole subject.
        found = None
        for _ in range(12):
            op = _draw_op(rng)
            object_tc = rng.choice(pool)
            objects = named(object_tc)
            base = SpatialOpSpec(op.spatial_type, op.num, False)
            candidates = [
                key
                for key, geom in objects.items()
                if (object_tc[0], object_tc[1], key.name) not in used
                and relate(subject_geom, geom, base)
            ]
            if candidates:
                found = (op, object_tc, rng.choice(candidates))
                break
        if found is None:
            return None
        op, object_tc, object_key = found
        used.add((object_tc[0], object_tc[1], object_key.name))
        entities.append(CaseEntity(object_tc[0], object_tc[1], object_key.name))
        relations.append(CaseRelation(relation_text(op), op, 0, index))
    return entities, relations


def generate_cases(
    store: KnowledgeStore, config: CaseConfig, mode: str = "template"
) -> List[EvalCase]:
    """Seeded valid cases: every emitted case has non-empty oracle truth."""
    if config.count <= 0:
        return []
    rng = random.Random(config.seed)
    pool = category_pool(store)
    if not pool:
        raise InsufficientData("store has no categories to sample from")
    tier = _TIER_BY_SHAPE.get((config.n_entities, config.named), 0)
    cases: List[EvalCase] = []
    named_cache: Dict[Tuple[str, str], GeoSet] = {}
    # Sparse stores make valid multi-relation draws rare (hundreds of
    # attempts per case), so the budget errs on the generous side.
    budget = max(1500 * config.count, 3000)
    attempts = 0
    while len(cases) < config.count:
        attempts += 1
        if attempts > budget:
            raise InsufficientData(
                f"only {len(cases)} of {config.count} cases after {budget} attempts"
            )
        if config.named:
            drawn = _draw_named(rng, store, pool, config.n_entities, named_cache)
        else:
            drawn = _draw_plain(rng, store, pool, config.n_entities)
        if drawn is None:
            continue
        entities, relations = drawn
        truth = oracle(store, entities, relations)
        if not truth:
            continue
        nl_query = paraphrase(entities, relations, seed=rng.randrange(1 << 30), mode=mode)
        cases.append(EvalCase(tier, tuple(entities), tuple(relations), nl_query, truth))
    return cases


# --- scripted plumbing --------------------------------------------------------


def spec_for_case(case: EvalCase) -> RelationSpec:
    return RelationSpec(
        entities=tuple(e.phrase() for e in case.entities),
        relations=tuple(
            SpatialRelation(r.text, r.subject, r.object) for r in case.relations
        ),
        region="",
    )


def plan_for_case(case: EvalCase) -> str:
    lines = []
    out = 0
    slot = {}
    for index, entity in enumerate(case.entities):
        out += 1
        lines.append(f"# Get the id_list of {entity.phrase()}")
        lines.append(f'out_{out} = id_list_of_entity("{entity.phrase()}")')
        slot[index] = f"out_{out}"
    current = slot[0]
    subject = case.entities[0].phrase()
    for rel in case.relations:
        out += 1
        lines.append(f"# Filter {subject} {rel.text} {case.entities[rel.object].phrase()}")
        lines.append(f"out_{out} = geo_filter('{rel.text}', {current}, {slot[rel.object]})")
        out += 1
        lines.append(f"# Get the filtered {subject} id_list")
        lines.append(f"out_{out} = get_subject(out_{out - 1})")
        current = f"out_{out}"
    return "\n".join(lines) + "\n"


def case_transcript(case: EvalCase) -> Transcript:
    transcript = Transcript()
    record_all(
        transcript,
        analyzer_query_entries(case.nl_query, spec_for_case(case), plan_for_case(case)),
    )
    for rel in case.relations:
        transcript.record(
            AgentRole.MODIFY_AGENT,
            rel.text,
            relation_reply(rel.op.spatial_type, rel.op.num, rel.op.negation),
        )
    return transcript


def suite_transcript(cases: Sequence[EvalCase]) -> Transcript:
    transcript = Transcript()
    for case in cases:
        transcript.merge(case_transcript(case))
    return transcript


# --- scoring -------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    accuracy: float
    tokens_in: float
    tokens_out: float

    def to_jsonable(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "accuracy": self.accuracy,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
        }


@dataclass(frozen=True)
class CaseResult:
    tier: int
    nl_query: str
    truth_size: int
    retrieved_size: int
    precision: float
    recall: float
    exact: bool
    failed: bool
    tokens_in: int
    tokens_out: int

    def to_jsonable(self) -> dict:
        return {
            "tier": self.tier,
            "nl_query": self.nl_query,
            "truth_size": self.truth_size,
            "retrieved_size": self.retrieved_size,
            "precision": self.precision,
            "recall": self.recall,
            "exact": self.exact,
            "failed": self.failed,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
        }


def case_scores(retrieved: frozenset, truth: frozenset) -> Tuple[float, float, bool]:
    overlap = len(retrieved & truth)
    if retrieved:
        precision = overlap / len(retrieved)
    else:
        precision = 1.0 if not truth else 0.0
    recall = overlap / len(truth) if truth else 1.0
    return precision, recall, retrieved == truth


def metrics_from(results: Sequence[CaseResult]) -> Metrics:
    n = len(results)
    if n == 0:
        return Metrics(0.0, 0.0, 0.0, 0.0, 0.0)
    return Metrics(
        precision=sum(r.precision for r in results) / n,
        recall=sum(r.recall for r in results) / n,
        accuracy=sum(1 for r in results if r.exact) / n,
        tokens_in=sum(r.tokens_in for r in results) / n,
        tokens_out=sum(r.tokens_out for r in results) / n,
    )


@dataclass(frozen=True)
class EvalReport:
    results: Tuple[CaseResult, ...]

    def tiers(self) -> Dict[int, Metrics]:
        grouped: Dict[int, List[CaseResult]] = {}
        for result in self.results:
            grouped.setdefault(result.tier, []).append(result)
        return {tier: metrics_from(rows) for tier, rows in sorted(grouped.items())}

    def overall(self) -> Metrics:
        return metrics_from(self.results)

    def to_jsonable(self) -> dict:
        return {
            "cases": [r.to_jsonable() for r in self.results],
            "tiers": {str(t): m.to_jsonable() for t, m in self.tiers().items()},
            "overall": self.overall().to_jsonable(),
        }

    def text_summary(self) -> str:
        header = f"{'tier':<8}{'cases':>6}{'precision':>11}{'recall':>9}{'accuracy':>10}{'tokens in/out':>16}"
        lines = [header, "-" * len(header)]
        grouped: Dict[int, List[CaseResult]] = {}
        for result in self.results:
            grouped.setdefault(result.tier, []).append(result)
        for tier, rows in sorted(grouped.items()):
            m = metrics_from(rows)
            lines.append(
                f"{tier:<8}{len(rows):>6}{m.precision:>10.1%}{m.recall:>9.1%}"
                f"{m.accuracy:>10.1%}{m.tokens_in:>9.0f}/{m.tokens_out:<.0f}"
            )
        m = self.overall()
        lines.append(
            f"{'all':<8}{len(self.results):>6}{m.precision:>10.1%}{m.recall:>9.1%}"
            f"{m.accuracy:>10.1%}{m.tokens_in:>9.0f}/{m.tokens_out:<.0f}"
        )
        return "\n".join(lines)


def evaluate(engine: Engine, cases: Sequence[EvalCase]) -> EvalReport:
    """Run each query end-to-end and score the last step against the oracle.

    Each case gets its own session, so the usage totals are per-case. A
    failing case (error answer, transcript miss, or any domain error)
    scores as a miss and is recorded, never fatal.
    """
    results = []
    for position, case in enumerate(cases):
        session_id = f"case-{position + 1}"
        retrieved: frozenset = frozenset()
        failed = False
        try:
            answer = engine.ask(session_id, case.nl_query)
            failed = answer.kind == "error"
            if answer.kind == "layers" and answer.steps:
                found = engine.find_step(answer.steps[-1].step_id)
                if found is not None:
                    retrieved = frozenset(found[1].keys())
        except GeoAskError:
            failed = True
        usage = engine.gateway.usage_report(session_id)
        precision, recall, exact = case_scores(retrieved, case.truth_keys)
        results.append(
            CaseResult(
                tier=case.tier,
                nl_query=case.nl_query,
                truth_size=len(case.truth_keys),
                retrieved_size=len(retrieved),
                precision=precision,
                recall=recall,
                exact=exact,
                failed=failed,
                tokens_in=usage.input_tokens,
                tokens_out=usage.output_tokens,
            )
        )
    return EvalReport(tuple(results))


# --- config-driven entry point --------------------------------------------------


_CONFIG_KEYS = {"seed", "features", "counts", "paraphrase"}


def run_config(path) -> EvalReport:
    """Generate, script, and evaluate the tiers described by a config file."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise BadConfig("eval config must be a JSON object")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise BadConfig(f"unknown eval config keys: {', '.join(unknown)}")
    seed = int(raw.get("seed", 7))
    features = int(raw.get("features", 2000))
    mode = raw.get("paraphrase", "template")
    if mode not in ("template", "exact"):
        raise BadConfig(f"paraphrase must be template or exact, got {mode!r}")
    counts_raw = raw.get("counts", {"1": 5, "2": 5, "3": 3, "4": 3})
    if not isinstance(counts_raw, dict):
        raise BadConfig("counts must map tier -> case count")
    counts: Dict[int, int] = {}
    for key, value in counts_raw.items():
        try:
            tier = int(key)
        except (TypeError, ValueError):
            raise BadConfig(f"bad tier key: {key!r}")
        if tier not in TIERS:
            raise BadConfig(f"unknown tier: {tier}")
        counts[tier] = int(value)

    store = build_store(synthetic_city(seed, features))
    cases: List[EvalCase] = []
    for tier in sorted(counts):
        n_entities, named = TIERS[tier]
        config = CaseConfig(n_entities, named, counts[tier], seed=seed + tier)
        cases.extend(generate_cases(store, config, mode=mode))
    engine = Engine(
        ScriptedGateway(suite_transcript(cases)),
        store,
        FixtureGeocoder(fixture_places()),
    )
    return evaluate(engine, cases)
