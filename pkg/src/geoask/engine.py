"""Session registry and the ask() entrypoint binding all agents together.

One Engine owns one knowledge store and one LLM gateway and serves many
isolated sessions. Each prompt is routed to the Analyzer (relation spec,
plan, execution with per-step map snapshots) or the Explainer (prose,
graph queries, charts); domain failures come back as error answers while
backend failures propagate to the caller.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .analyzer import FilterResult, RelationClassifier
from .errors import (
    BackendUnavailable,
    GeoAskError,
    RateLimited,
    StepFailed,
    TranscriptMiss,
    describe,
)
from .explainer import ChartSpec, Explainer, variables_listing
from .keys import GeoSet
from .llm import LLMGateway, TokenUsage
from .planner import Planner, RECEIVER_ANALYZER, StepResult, TaskPlan, VariableRef
from .region import RegionSelector
from .retriever import EntityRetriever
from .store import KnowledgeStore

# The relation analyzer sees this many prior user/assistant exchanges.
HISTORY_EXCHANGES = 3

_FENCED = re.compile(r"```.*?```", re.DOTALL)


@dataclass
class SessionState:
    """Everything one conversation accumulates across prompts.

    ``variables`` holds plan outputs by name, ``step_results`` immutable
    per-step map snapshots by step id, and ``history`` alternating
    (speaker, text) pairs fed back to the agents as context.
    """

    session_id: str
    variables: Dict[str, object] = field(default_factory=dict)
    history: List[Tuple[str, str]] = field(default_factory=list)
    step_results: Dict[str, GeoSet] = field(default_factory=dict)
    step_descriptions: Dict[str, str] = field(default_factory=dict)
    region_cache: Dict[str, object] = field(default_factory=dict)
    bbox_wkt: Optional[str] = None
    turn: int = 0


@dataclass(frozen=True)
class StepRecord:
    """One executed plan step as surfaced to clients."""

    index: int
    description: str
    step_id: str


@dataclass(frozen=True)
class Answer:
    """Engine outcome for one prompt; the service serializes this."""

    kind: str  # layers | text | chart | error
    message: str
    steps: Tuple[StepRecord, ...] = ()
    display: Optional[GeoSet] = None
    chart: Optional[ChartSpec] = None
    usage: TokenUsage = TokenUsage()


def step_id_for(session_id: str, turn: int, index: int) -> str:
    """Deterministic step id; identical scripted runs mint identical ids."""
    return f"{session_id}:{turn}:{index}"


class Engine:
    """Route prompts, run plans or explanations, keep sessions isolated."""

    def __init__(self, gateway: LLMGateway, store: KnowledgeStore, geocoder):
        self.gateway = gateway
        self.store = store
        self.retriever = EntityRetriever(store, gateway)
        self.selector = RegionSelector(gateway, geocoder)
        self.classifier = RelationClassifier(gateway)
        self.planner = Planner(gateway, self.retriever, self.selector, self.classifier)
        self.explainer = Explainer(gateway, store)
        self._sessions: Dict[str, SessionState] = {}
        self._locks: Dict[str, threading.Lock] = {}
        self._registry = threading.Lock()

    # -- sessions -----------------------------------------------------------

    def session(self, session_id: str) -> SessionState:
        """Fetch or create the session; creation opens gateway accounting."""
        with self._registry:
            state = self._sessions.get(session_id)
            if state is None:
                state = SessionState(session_id)
                self._sessions[session_id] = state
                self._locks[session_id] = threading.Lock()
                self.gateway.open_session(session_id)
            return state

    def has_session(self, session_id: str) -> bool:
        with self._registry:
            return session_id in self._sessions

    def find_step(self, step_id: str) -> Optional[Tuple[str, GeoSet]]:
        """(description, snapshot) for a step id, or None when unknown.

        Step ids embed the session id as their prefix, so only that
        session's table is consulted.
        """
        session_id = step_id.rsplit(":", 2)[0]
        with self._registry:
            state = self._sessions.get(session_id)
        if state is None:
            return None
        snapshot = state.step_results.get(step_id)
        if snapshot is None:
            return None
        return state.step_descriptions.get(step_id, ""), snapshot

    # -- the entrypoint -----------------------------------------------------

    def ask(self, session_id: str, prompt: str) -> Answer:
        """Answer one prompt inside a session.

        Requests within a session are serialized; distinct sessions run
        concurrently. Backend failures (unreachable endpoint, rate limit,
        transcript miss) propagate; every other engine error becomes an
        error-kind answer.
        """
        if not prompt or not prompt.strip():
            raise ValueError("prompt is empty")
        text = prompt.strip()
        state = self.session(session_id)
        with self._locks_entry(session_id):
            state.turn += 1
            try:
                answer = self._dispatch(text, state)
            except (BackendUnavailable, RateLimited, TranscriptMiss):
                raise
            except GeoAskError as exc:
                answer = Answer(kind="error", message=describe(exc))
            state.history.append(("user", text))
            state.history.append(("assistant", answer.message))
            return replace(answer, usage=self.gateway.usage_report(session_id))

    def _locks_entry(self, session_id: str) -> threading.Lock:
        with self._registry:
            return self._locks[session_id]

    def _dispatch(self, prompt: str, state: SessionState) -> Answer:
        receiver = self.planner.route(prompt, state)
        if receiver == RECEIVER_ANALYZER:
            return self._run_analyzer(prompt, state)
        return self._run_explainer(prompt, state)

    # -- analyzer branch ----------------------------------------------------

    def _run_analyzer(self, prompt: str, state: SessionState) -> Answer:
        context = tuple(state.history[-2 * HISTORY_EXCHANGES :])
        spec = self.planner.analyze_relations(prompt, state.session_id, context=context)
        plan = self.planner.plan_mission(
            spec,
            prompt,
            history=variables_listing(state),
            known_variables=frozenset(state.variables),
            session_id=state.session_id,
        )
        try:
            results = self.planner.execute_plan(plan, state)
        except StepFailed as exc:
            records = self._register_steps(list(exc.completed), state)
            return Answer(kind="error", message=describe(exc), steps=records)
        records = self._register_steps(results, state)
        display = self._display_set(plan, results, state)
        count = len(display)
        noun = "result has" if count == 1 else "results have"
        message = f"{count} {noun} been visualized on the map."
        return Answer(kind="layers", message=message, steps=records, display=display)

    def _register_steps(
        self, results: List[StepResult], state: SessionState
    ) -> Tuple[StepRecord, ...]:
        records = []
        for res in results:
            step_id = step_id_for(state.session_id, state.turn, res.index)
            state.step_results[step_id] = res.snapshot
            state.step_descriptions[step_id] = res.description
            records.append(StepRecord(res.index, res.description, step_id))
        return tuple(records)

    def _display_set(
        self, plan: TaskPlan, results: List[StepResult], state: SessionState
    ) -> GeoSet:
        """GeoSet shown on the final map.

        Normally the last step's snapshot. When the plan ends by taking one
        side of a filtered relation, the map keeps showing both surviving
        sides (the answer set stays the single side); the step buttons still
        show each intermediate state.
        """
        display = results[-1].snapshot
        last_call = plan.steps[len(results) - 1].call
        if last_call.function in ("get_subject", "get_object"):
            ref = last_call.args[0]
            source = state.variables.get(ref.name) if isinstance(ref, VariableRef) else None
            if isinstance(source, FilterResult):
                display = source.subject.union(source.object)
        return display

    # -- explainer branch ---------------------------------------------------

    def _run_explainer(self, prompt: str, state: SessionState) -> Answer:
        result = self.explainer.explain(prompt, state)
        if result.kind == "chart":
            message = _FENCED.sub("", result.text).strip()
            if not message:
                message = result.payload.title or "Here is the chart."
            return Answer(kind="chart", message=message, chart=result.payload)
        # "table" answers arrive pre-formatted as numbered rows.
        return Answer(kind="text", message=result.text)
