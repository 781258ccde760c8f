"""Canned agent transcripts for the offline walkthroughs.

Scripted mode replays responses keyed by (agent role, user content), so
these builders must produce the exact user strings the pipeline sends.
They reuse the pipeline's own message builders (``mission_user``,
``intent_user``, ...) to stay in sync by construction.
"""

from __future__ import annotations

import json
from typing import Iterable, Optional, Tuple

from ..llm import Transcript
from ..planner import RelationSpec, SpatialRelation, mission_user
from ..prompts import AgentRole
from ..retriever import intent_user, quality_user, rewrite_user
from .fixtures import CLAY_ROW, FARMING_QUERY, LOAM_REWRITE, LOAM_ROW

WORKED_PROMPT = "Buildings within 100 meters of the parks in Munich Maxvorstadt"
BUILDINGS_PROMPT = "all buildings in Maxvorstadt"
FRAUENKIRCHE_PROMPT = "Frauenkirche in Munich Old Town"
DATASET_PROMPT = "what are the datasets we have?"
CHART_PROMPT = "Can you draw me a diagram for area distribution of buildings you searched?"

WORKED_SPEC = RelationSpec(
    entities=("buildings", "parks"),
    relations=(SpatialRelation("within 100 meters of", 0, 1),),
    region="Munich Maxvorstadt",
)

WORKED_PLAN_CODE = """\
# Set the bounding box to Munich Maxvorstadt
set_bounding_box("Munich Maxvorstadt")
# Get the id_list of parks
out_1 = id_list_of_entity("park")
# Get the id_list of buildings
out_2 = id_list_of_entity("building")
# Filter buildings within 100 meters of the parks
out_3 = geo_filter('within 100 meters of', out_2, out_1)
# Get the filtered buildings id_list
out_4 = get_subject(out_3)
"""

WORKED_STEP_DESCRIPTIONS = (
    "Set the bounding box to Munich Maxvorstadt",
    "Get the id_list of parks",
    "Get the id_list of buildings",
    "Filter buildings within 100 meters of the parks",
    "Get the filtered buildings id_list",
)

BUILDINGS_SPEC = RelationSpec(
    entities=("buildings",),
    relations=(),
    region="Maxvorstadt",
)

BUILDINGS_PLAN_CODE = """\
# Set the bounding box to Maxvorstadt
set_bounding_box("Maxvorstadt")
# Get the id_list of buildings
out_1 = id_list_of_entity("building")
"""

FRAUENKIRCHE_SPEC = RelationSpec(
    entities=("Frauenkirche",),
    relations=(),
    region="Munich Old Town",
)

FRAUENKIRCHE_PLAN_CODE = """\
# Set the bounding box to Munich Old Town
set_bounding_box("Munich Old Town")
# Get the id_list of Frauenkirche
out_1 = id_list_of_entity("Frauenkirche")
"""

DATASET_QUERY_REPLY = (
    "I will look up the table nodes in the schema graph.\n"
    "```cypher\n"
    "MATCH (t {type:'table'}) RETURN t.id\n"
    "```"
)

DATASET_QUERY_RESULT = 'Query result: ["soil", "roads", "points", "area", "buildings"]'

DATASET_ANSWER = (
    '"Explain result" Please tell me which one or more of these datasets you '
    "are interested in and what information you want to query.\n"
    "\n"
    "You have the following datasets in your database:\n"
    "1. soil\n"
    "2. roads\n"
    "3. points\n"
    "4. area\n"
    "5. buildings"
)

CHART_ACTION = {
    "action": "chart",
    "kind": "histogram",
    "variable": "out_1",
    "measure": "area",
    "title": "Area distribution of buildings",
    "x_label": "area (m²)",
}

CHART_REPLY = (
    "The searched buildings are stored in out_1; I will chart their areas.\n"
    f"```json\n{json.dumps(CHART_ACTION, ensure_ascii=False)}\n```"
)


def fenced_json(payload: object) -> str:
    """Reasoning line plus a fenced json block, the replayed reply shape."""
    return f"Reasoning first.\n```json\n{json.dumps(payload, ensure_ascii=False)}\n```"


def plan_reply(code: str) -> str:
    return f"Thinking through the mission.\n```python\n{code}```"


def route_reply(receiver: str) -> str:
    return fenced_json({"Receiver": receiver})


def directive_reply(place: str, cut: Optional[str] = None, scale: Optional[float] = None) -> str:
    return fenced_json({"place": place, "cut": cut, "scale": scale})


def relation_reply(spatial_type: str, num: float, negation: bool) -> str:
    return fenced_json({"spatial_type": spatial_type, "num": num, "negation": negation})


def analyzer_query_entries(
    prompt: str, spec: RelationSpec, plan_code: str
) -> Iterable[Tuple[AgentRole, str, str]]:
    """Router, relation-analyzer, and planner rows for one search prompt."""
    return [
        (AgentRole.ROUTER, prompt, route_reply("Analyzer")),
        (AgentRole.RELATION_ANALYZER, prompt, fenced_json(spec.to_jsonable())),
        (AgentRole.MISSION_PLANNER, mission_user(prompt, spec), plan_reply(plan_code)),
    ]


def record_all(transcript: Transcript, entries: Iterable[Tuple[AgentRole, str, str]]) -> None:
    for role, user_content, response in entries:
        transcript.record(role, user_content, response)


def worked_transcript() -> Transcript:
    """The buildings-near-parks walkthrough plus its region and relation rows."""
    transcript = Transcript()
    record_all(transcript, analyzer_query_entries(WORKED_PROMPT, WORKED_SPEC, WORKED_PLAN_CODE))
    transcript.record(
        AgentRole.BBOX_MODIFIER, "Munich Maxvorstadt", directive_reply("Munich Maxvorstadt")
    )
    transcript.record(
        AgentRole.MODIFY_AGENT, "within 100 meters of", relation_reply("buffer", 100, False)
    )
    return transcript


def searches_transcript() -> Transcript:
    """The plain building search and the Frauenkirche name search."""
    transcript = Transcript()
    record_all(
        transcript,
        analyzer_query_entries(BUILDINGS_PROMPT, BUILDINGS_SPEC, BUILDINGS_PLAN_CODE),
    )
    record_all(
        transcript,
        analyzer_query_entries(FRAUENKIRCHE_PROMPT, FRAUENKIRCHE_SPEC, FRAUENKIRCHE_PLAN_CODE),
    )
    transcript.record(AgentRole.BBOX_MODIFIER, "Maxvorstadt", directive_reply("Maxvorstadt"))
    transcript.record(
        AgentRole.BBOX_MODIFIER, "Munich Old Town", directive_reply("Munich Old Town")
    )
    transcript.record(
        AgentRole.BBOX_MODIFIER, "south of Maxvorstadt", directive_reply("Maxvorstadt", cut="south")
    )
    return transcript


def relation_phrases_transcript() -> Transcript:
    """Canonicalizations for the documented relation phrasings."""
    transcript = Transcript()
    transcript.record(
        AgentRole.MODIFY_AGENT, "around 100 meters", relation_reply("buffer", 100, False)
    )
    transcript.record(
        AgentRole.MODIFY_AGENT, "outside 100 meters", relation_reply("buffer", 100, True)
    )
    return transcript


def explainer_transcript() -> Transcript:
    """Dataset-listing and histogram conversations."""
    transcript = Transcript()
    transcript.record(AgentRole.ROUTER, DATASET_PROMPT, route_reply("Explainer"))
    transcript.record(AgentRole.EXPLAINER, DATASET_PROMPT, DATASET_QUERY_REPLY)
    transcript.record(AgentRole.EXPLAINER, DATASET_QUERY_RESULT, DATASET_ANSWER)
    transcript.record(AgentRole.ROUTER, CHART_PROMPT, route_reply("Explainer"))
    transcript.record(AgentRole.EXPLAINER, CHART_PROMPT, CHART_REPLY)
    return transcript


def retrieval_transcript() -> Transcript:
    """The two retrieval traces over the portal fixture.

    "greenery spaces" finds nothing by keyword, similarity proposes
    grass/meadow/greengrocer, and the quality check keeps the two real
    green categories. The farming query keyword-matches two tables, the
    intent step narrows to the soil table, the first similarity pass comes
    up empty, and the rewrite makes the loam row retrievable.
    """
    transcript = Transcript()
    transcript.record(
        AgentRole.INTENT_MATCHER,
        intent_user("greenery spaces", []),
        fenced_json({"named_entity": False, "valid_pairs": [], "table": ""}),
    )
    transcript.record(
        AgentRole.QUALITY_CHECKER,
        quality_user("greenery spaces", ["grass", "meadow", "greengrocer"]),
        fenced_json({"valid": ["grass", "meadow"]}),
    )
    transcript.record(
        AgentRole.INTENT_MATCHER,
        intent_user(FARMING_QUERY, ["table:soil", "table:area"]),
        fenced_json({"named_entity": True, "valid_pairs": ["table:soil"], "table": "soil"}),
    )
    transcript.record(
        AgentRole.IMITATION_REWRITER,
        rewrite_user(FARMING_QUERY, [LOAM_ROW, CLAY_ROW]),
        fenced_json({"rewritten": LOAM_REWRITE}),
    )
    return transcript


def demo_transcript() -> Transcript:
    """Every scripted flow merged, for serving the portal offline."""
    merged = Transcript()
    merged.merge(worked_transcript())
    merged.merge(searches_transcript())
    merged.merge(relation_phrases_transcript())
    merged.merge(explainer_transcript())
    merged.merge(retrieval_transcript())
    return merged
