"""Routing, relation analysis, mission planning, and plan execution.

The planner agent writes "code", but nothing here executes code: each line
is parsed by a one-call-per-line grammar and checked against a whitelist of
pre-implemented tools before the executor dispatches it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from .analyzer import FilterResult, RelationClassifier, geo_filter
from .errors import (
    CallSyntax,
    GeoAskError,
    MalformedSpec,
    NoCodeFound,
    NonWhitelistedCall,
    StepFailed,
    UnknownVariable,
    UnplannableSpec,
    UnroutableResponse,
)
from .geometry import parse_wkt
from .keys import EntityKey, GeoSet
from .llm import CompletionRequest, LLMGateway, ask_json, last_fenced_block
from .prompts import MISSION_TOOLS, AgentRole, render_prompt
from .region import RegionSelector
from .retriever import EntityRetriever
from .textnorm import normalize

RECEIVER_ANALYZER = "Analyzer"
RECEIVER_EXPLAINER = "Explainer"

# function name -> required argument shapes ("text" literal or "var" reference)
PLAN_WHITELIST: Dict[str, Tuple[str, ...]] = {
    "set_bounding_box": ("text",),
    "id_list_of_entity": ("text",),
    "geo_filter": ("text", "var", "var"),
    "get_subject": ("var",),
    "get_object": ("var",),
}


@dataclass(frozen=True)
class SpatialRelation:
    type: str
    subject: int
    object: int


@dataclass(frozen=True)
class RelationSpec:
    """Parsed question structure: entity texts, typed relations, region."""

    entities: Tuple[str, ...]
    relations: Tuple[SpatialRelation, ...]
    region: str = ""

    def to_jsonable(self) -> dict:
        return {
            "entities": [{"entity_text": text} for text in self.entities],
            "spatial_relations": [
                {"type": rel.type, "subject": rel.subject, "object": rel.object}
                for rel in self.relations
            ],
            "region": self.region,
        }


@dataclass(frozen=True)
class VariableRef:
    name: str


PlanArg = Union[str, int, float, VariableRef]


@dataclass(frozen=True)
class FunctionCall:
    function: str
    args: Tuple[PlanArg, ...]


@dataclass(frozen=True)
class PlanStep:
    description: str
    call: FunctionCall
    output_name: str = ""


@dataclass(frozen=True)
class TaskPlan:
    steps: Tuple[PlanStep, ...]


@dataclass(frozen=True)
class StepResult:
    """One executed step: 1-based index, description, binding, map snapshot."""

    index: int
    description: str
    output_name: str
    snapshot: GeoSet


def _index_pair(rel: dict) -> Tuple[object, object]:
    subject = rel["subject"] if "subject" in rel else rel.get("head")
    object_ = rel["object"] if "object" in rel else rel.get("tail")
    return subject, object_


def relation_spec_from_payload(payload: object) -> RelationSpec:
    """Validate the analyzer's JSON; normalize head/tail to subject/object."""
    if not isinstance(payload, dict):
        raise MalformedSpec("relation payload is not an object")
    if "entities" not in payload or "spatial_relations" not in payload:
        raise MalformedSpec("payload needs entities and spatial_relations")
    raw_entities = payload["entities"]
    if not isinstance(raw_entities, list):
        raise MalformedSpec("entities is not a list")
    entities: List[str] = []
    for item in raw_entities:
        if not isinstance(item, dict):
            raise MalformedSpec(f"entity item is not an object: {item!r}")
        text = item.get("entity_text")
        if not isinstance(text, str) or not text.strip():
            raise MalformedSpec(f"entity without entity_text: {item!r}")
        entities.append(text.strip())
    raw_relations = payload["spatial_relations"]
    if not isinstance(raw_relations, list):
        raise MalformedSpec("spatial_relations is not a list")
    relations: List[SpatialRelation] = []
    for rel in raw_relations:
        if not isinstance(rel, dict):
            raise MalformedSpec(f"relation item is not an object: {rel!r}")
        rtype = rel.get("type")
        if not isinstance(rtype, str) or not rtype.strip():
            raise MalformedSpec(f"relation without type: {rel!r}")
        subject, object_ = _index_pair(rel)
        for value in (subject, object_):
            if isinstance(value, bool) or not isinstance(value, int):
                raise MalformedSpec(f"relation index is not an integer: {rel!r}")
            if not 0 <= value < len(entities):
                raise MalformedSpec(f"relation index out of range: {rel!r}")
        relations.append(SpatialRelation(rtype.strip(), subject, object_))
    region = payload.get("region", "")
    if region is None:
        region = ""
    if not isinstance(region, str):
        raise MalformedSpec(f"region is not text: {region!r}")
    return RelationSpec(tuple(entities), tuple(relations), region.strip())


_CALL_LINE = re.compile(
    r"^(?:(?P<out>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*)?"
    r"(?P<name>[A-Za-z_][A-Za-z0-9_.]*)\s*\((?P<args>.*)\)$",
    re.DOTALL,
)

_NUMBER_CHARS = set("0123456789+-.eE")


def _parse_args(text: str, base: int) -> List[PlanArg]:
    args: List[PlanArg] = []
    i, n = 0, len(text)
    while i < n and text[i].isspace():
        i += 1
    if i >= n:
        return args
    while True:
        ch = text[i]
        if ch in "'\"":
            end = text.find(ch, i + 1)
            if end < 0:
                raise CallSyntax(base + i, "unterminated string")
            args.append(text[i + 1 : end])
            i = end + 1
        elif ch.isdigit() or ch in "+-.":
            j = i
            while j < n and text[j] in _NUMBER_CHARS:
                j += 1
            token = text[i:j]
            try:
                value: PlanArg = int(token)
            except ValueError:
                try:
                    value = float(token)
                except ValueError:
                    raise CallSyntax(base + i, f"bad number {token!r}")
            args.append(value)
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            args.append(VariableRef(text[i:j]))
            i = j
        else:
            raise CallSyntax(base + i, f"unexpected character {ch!r}")
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        if text[i] != ",":
            raise CallSyntax(base + i, "expected ','")
        i += 1
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            raise CallSyntax(base + i, "trailing comma")
    return args


def parse_call_text(
    code_line: str, known: Optional[FrozenSet[str]] = None
) -> Tuple[str, FunctionCall]:
    """One plan line -> (output name or "", whitelisted call).

    Grammar: ``[name =] function(arg, ...)`` with string, number, and
    identifier arguments only. With ``known`` given, identifier arguments
    must name an already-defined variable.
    """
    line = code_line.strip()
    match = _CALL_LINE.match(line)
    if match is None:
        raise CallSyntax(0, f"expected name(arguments), got {line!r}")
    name = match.group("name")
    if name not in PLAN_WHITELIST:
        raise NonWhitelistedCall(name)
    args = _parse_args(match.group("args"), match.start("args"))
    shape = PLAN_WHITELIST[name]
    if len(args) != len(shape):
        raise CallSyntax(
            match.start("args"),
            f"{name} takes {len(shape)} argument(s), got {len(args)}",
        )
    for arg, want in zip(args, shape):
        if want == "text" and not isinstance(arg, str):
            raise CallSyntax(match.start("args"), f"{name} expects a string literal")
        if want == "var" and not isinstance(arg, VariableRef):
            raise CallSyntax(match.start("args"), f"{name} expects a variable name")
    if known is not None:
        for arg in args:
            if isinstance(arg, VariableRef) and arg.name not in known:
                raise UnknownVariable(arg.name)
    return match.group("out") or "", FunctionCall(name, tuple(args))


def parse_plan_code(code: str, known_variables: FrozenSet[str] = frozenset()) -> TaskPlan:
    """Fenced-block body -> TaskPlan.

    ``#`` comments immediately above a call become its step description; a
    blank line discards pending comments. Each call may only read variables
    defined by earlier steps or passed in via ``known_variables``. A step
    may rebind a name carried over from an earlier turn, but two steps of
    the same plan can never write the same name.
    """
    steps: List[PlanStep] = []
    defined: set = set()
    names = set(known_variables)
    comments: List[str] = []
    for raw in code.splitlines():
        line = raw.strip()
        if not line:
            comments = []
            continue
        if line.startswith("#"):
            comments.append(line.lstrip("#").strip())
            continue
        output_name, call = parse_call_text(line, known=frozenset(names))
        if output_name and output_name in defined:
            raise CallSyntax(0, f"output name reused: {output_name}")
        description = " ".join(c for c in comments if c) or line
        steps.append(PlanStep(description, call, output_name))
        if output_name:
            defined.add(output_name)
            names.add(output_name)
        comments = []
    if not steps:
        raise UnplannableSpec("plan contains no tool calls")
    return TaskPlan(tuple(steps))


def mission_user(prompt: str, spec: RelationSpec) -> str:
    """User message sent to the mission planner agent."""
    return f'query: "{prompt}"\nrelations: {json.dumps(spec.to_jsonable())}'


class Planner:
    """Router, relation analyzer, mission planner, and plan executor."""

    def __init__(
        self,
        gateway: LLMGateway,
        retriever: EntityRetriever,
        selector: RegionSelector,
        classifier: RelationClassifier,
    ):
        self.gateway = gateway
        self.retriever = retriever
        self.selector = selector
        self.classifier = classifier

    def route(self, prompt: str, session=None) -> str:
        """Pick the receiver for a prompt: Analyzer or Explainer."""
        session_id = getattr(session, "session_id", "default")
        payload, _ = ask_json(self.gateway, AgentRole.ROUTER, prompt, session_id)
        if not isinstance(payload, dict) or "Receiver" not in payload:
            raise UnroutableResponse(f"router reply lacks Receiver: {payload!r}")
        receiver = str(payload["Receiver"]).strip().lower()
        if receiver == "analyzer":
            return RECEIVER_ANALYZER
        if receiver == "explainer":
            return RECEIVER_EXPLAINER
        raise UnroutableResponse(f"unknown receiver: {payload['Receiver']!r}")

    def analyze_relations(
        self,
        prompt: str,
        session_id: str = "default",
        context: Tuple[Tuple[str, str], ...] = (),
    ) -> RelationSpec:
        payload, _ = ask_json(
            self.gateway, AgentRole.RELATION_ANALYZER, prompt, session_id, context=context
        )
        return relation_spec_from_payload(payload)

    def plan_mission(
        self,
        spec: RelationSpec,
        prompt: str,
        history: str = "",
        known_variables: FrozenSet[str] = frozenset(),
        session_id: str = "default",
    ) -> TaskPlan:
        if not spec.entities:
            raise UnplannableSpec("spec names no entities")
        for rel in spec.relations:
            if not (0 <= rel.subject < len(spec.entities)) or not (
                0 <= rel.object < len(spec.entities)
            ):
                raise UnplannableSpec(f"relation references unknown entity: {rel}")
        system = render_prompt(
            AgentRole.MISSION_PLANNER, {"tools": MISSION_TOOLS, "history": history}
        )
        request = CompletionRequest(
            role=AgentRole.MISSION_PLANNER,
            user_content=mission_user(prompt, spec),
            system=system,
        )
        response = self.gateway.complete(request, session_id)
        code = last_fenced_block(response.text, "python")
        if code is None:
            code = last_fenced_block(response.text)
        if code is None:
            raise NoCodeFound(f"planner reply has no fenced code: {response.text[:80]!r}")
        return parse_plan_code(code, known_variables)

    def execute_plan(self, plan: TaskPlan, session) -> List[StepResult]:
        """Run steps in order, binding outputs to session variables.

        A failing step aborts the rest; the raised StepFailed carries the
        1-based step index, the cause, and the results finished before it.
        Bindings made by completed steps stay on the session.
        """
        results: List[StepResult] = []
        for index, step in enumerate(plan.steps, start=1):
            try:
                value, snapshot = self._run_call(step.call, session)
            except (GeoAskError, TypeError) as exc:
                raise StepFailed(index, exc, completed=tuple(results)) from exc
            if step.output_name:
                session.variables[step.output_name] = value
            results.append(StepResult(index, step.description, step.output_name, snapshot))
        return results

    def _resolve(self, arg: PlanArg, session) -> object:
        if isinstance(arg, VariableRef):
            try:
                return session.variables[arg.name]
            except KeyError:
                raise UnknownVariable(arg.name)
        return arg

    def _run_call(self, call: FunctionCall, session) -> Tuple[object, GeoSet]:
        args = [self._resolve(arg, session) for arg in call.args]
        if call.function == "set_bounding_box":
            return self._set_bounding_box(args[0], session)
        if call.function == "id_list_of_entity":
            box = None
            if session.bbox_wkt:
                box = parse_wkt(session.bbox_wkt).bbox()
            found, _ = self.retriever.retrieve(args[0], box, session_id=session.session_id)
            return found, found
        if call.function == "geo_filter":
            relation_text, subject, object_set = args
            if not isinstance(subject, GeoSet) or not isinstance(object_set, GeoSet):
                raise TypeError("geo_filter expects two GeoSet variables")
            op = self.classifier.classify_relation(relation_text, session.session_id)
            result = geo_filter(op, subject, object_set)
            return result, result.subject.union(result.object)
        if call.function in ("get_subject", "get_object"):
            filtered = args[0]
            if not isinstance(filtered, FilterResult):
                raise TypeError(f"{call.function} expects a geo_filter result")
            side = filtered.subject if call.function == "get_subject" else filtered.object
            return side, side
        raise NonWhitelistedCall(call.function)

    def _set_bounding_box(self, address: str, session) -> Tuple[None, GeoSet]:
        if not normalize(address):
            session.bbox_wkt = None
            return None, GeoSet()
        box = self.selector.resolve_region(address, session)
        if box is None:
            session.bbox_wkt = None
            return None, GeoSet()
        key = EntityKey("session", "bbox", address.strip(), "0")
        return None, GeoSet([(key, parse_wkt(session.bbox_wkt))])
