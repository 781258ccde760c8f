import json
import random
from dataclasses import dataclass, field

import pytest

from geoask.analyzer import FilterResult
from geoask.errors import (
    EmptyValues,
    GraphQuerySyntax,
    IterationLimit,
    UnknownEdgeType,
    UnsupportedFeature,
)
from geoask.explainer import (
    ChartSpec,
    EdgeSpec,
    Explainer,
    GraphQuery,
    NodeSpec,
    Projection,
    make_histogram,
    parse_graph_query,
    run_graph_query,
    sturges_bins,
    variables_listing,
)
from geoask.keys import GeoSet
from geoask.llm import ScriptedGateway, Transcript
from geoask.prompts import AgentRole
from geoask.store import KnowledgeStore


def poly(lon, lat, d=0.001):
    ring = [[lon, lat], [lon + d, lat], [lon + d, lat + d], [lon, lat + d], [lon, lat]]
    return {"type": "Polygon", "coordinates": [ring]}


def feature(lon, lat, name, fclass, osm_id):
    return {
        "type": "Feature",
        "geometry": poly(lon, lat),
        "properties": {"name": name, "fclass": fclass, "osm_id": osm_id},
    }


def collection(*features):
    return {"type": "FeatureCollection", "features": list(features)}


def portal_store():
    store = KnowledgeStore()
    store.ingest_geojson("soil", collection(feature(11.50, 48.12, "loam belt", "loam", 1)))
    store.ingest_geojson("roads", collection(feature(11.51, 48.13, "Arcisstraße", "primary", 2)))
    store.ingest_geojson("points", collection(feature(11.52, 48.14, "Kiosk", "greengrocer", 3)))
    store.ingest_geojson("area", collection(feature(11.53, 48.15, "Theresienwiese", "grass", 4)))
    store.ingest_geojson(
        "buildings", collection(feature(11.54, 48.16, "Krone-Villa", "building", 5))
    )
    return store


def land_store():
    store = KnowledgeStore()
    store.ingest_geojson(
        "land",
        collection(
            feature(11.56, 48.14, "Salinenhof", "park", 17978461),
            feature(11.57, 48.15, "Hofgarten", "forest", 17978463),
            feature(11.58, 48.15, "Alter Botanischer Garten", "park", 17978462),
        ),
    )
    return store


def gateway(*entries):
    transcript = Transcript()
    for role, user_content, response in entries:
        transcript.record(role, user_content, response)
    return ScriptedGateway(transcript)


@dataclass
class FakeSession:
    session_id: str = "s1"
    variables: dict = field(default_factory=dict)
    history: list = field(default_factory=list)


def recount(values, edges):
    counts = [0] * (len(edges) - 1)
    for v in values:
        for i in range(len(counts)):
            last = i == len(counts) - 1
            if edges[i] <= v < edges[i + 1] or (last and v == edges[-1]):
                counts[i] += 1
                break
    return counts


class TestMakeHistogram:
    def test_uniform_spread(self):
        spec = make_histogram(list(range(10)), bins=5)
        assert spec.counts == (2, 2, 2, 2, 2)
        assert spec.bin_edges[0] == 0.0
        assert spec.bin_edges[-1] == 9.0

    def test_degenerate_range_unit_width(self):
        for bins in (None, 1, 5):
            spec = make_histogram([3, 3, 3], bins=bins)
            assert sum(spec.counts) == 3
            pos = spec.counts.index(3)
            assert spec.bin_edges[pos] <= 3 <= spec.bin_edges[pos + 1]

    def test_mass_conservation_against_recount(self):
        rng = random.Random(7)
        for trial in range(25):
            n = rng.randint(1, 300)
            values = [rng.uniform(-50, 150) for _ in range(n)]
            bins = rng.choice([None, 1, 3, 10])
            spec = make_histogram(values, bins=bins)
            assert sum(spec.counts) == n, trial
            assert list(spec.counts) == recount(values, spec.bin_edges), trial

    def test_sturges_default(self):
        assert sturges_bins(1) == 1
        assert sturges_bins(2) == 2
        assert sturges_bins(100) == 8
        spec = make_histogram([float(i) for i in range(100)])
        assert len(spec.counts) == 8

    def test_empty_values(self):
        with pytest.raises(EmptyValues):
            make_histogram([])

    def test_title_and_label_carried(self):
        spec = make_histogram([1.0, 2.0], title="Areas", x_label="m2")
        assert spec.title == "Areas"
        assert spec.x_label == "m2"

    def test_jsonable_shape(self):
        payload = make_histogram([1.0, 2.0, 5.0], bins=2).to_jsonable()
        assert payload["version"] == 1
        assert payload["kind"] == "histogram"
        assert len(payload["bin_edges"]) == len(payload["counts"]) + 1

    def test_chartspec_invariants(self):
        with pytest.raises(ValueError):
            ChartSpec(bin_edges=(0.0, 1.0), counts=(1, 2))
        with pytest.raises(ValueError):
            ChartSpec(bin_edges=(1.0, 0.0), counts=(1,))
        with pytest.raises(ValueError):
            ChartSpec(bin_edges=(0.0, 1.0), counts=(-1,))


class TestParseGraphQuery:
    def test_all_tables_ast(self):
        query = parse_graph_query("MATCH (n {type:'table'}) RETURN n.id")
        assert query == GraphQuery(
            start=NodeSpec("n", type="table"),
            projections=(Projection("n", "id"),),
        )

    def test_one_hop_ast(self):
        query = parse_graph_query("MATCH (a {type:'table'})-[r:table_fclass]->(b) RETURN b.id")
        assert query.start == NodeSpec("a", type="table")
        assert query.edge == EdgeSpec("table_fclass", "r")
        assert query.end == NodeSpec("b")
        assert query.projections == (Projection("b", "id"),)

    def test_id_constraint_and_two_projections(self):
        text = "MATCH (a {type:'table', id:'land'})-[:table_fclass]->(b) RETURN a.id, b.id"
        query = parse_graph_query(text)
        assert query.start.id == "land"
        assert query.edge.var == ""
        assert len(query.projections) == 2

    def test_case_insensitive_keywords_and_semicolon(self):
        query = parse_graph_query("match (n {type:'table'}) return n.id;")
        assert query.start.type == "table"

    @pytest.mark.parametrize(
        "text",
        [
            "MATCH (a)-->(b)-->(c) RETURN c",
            "MATCH (a)-[r:x]->(b)-[s:y]->(c) RETURN c.id",
            "MATCH (a {type:'table'}) WHERE a.id = 'soil' RETURN a.id",
            "MATCH (a {type:'table'}) RETURN count(a)",
            "MATCH (a)<-[r:table_fclass]-(b) RETURN a.id",
            "MATCH (a {type:'table'}) RETURN a.id ORDER BY a.id",
            "MATCH (a {type:'table'}) RETURN a.id LIMIT 3",
            "MATCH (a), (b) MATCH (c) RETURN a.id",
        ],
    )
    def test_unsupported_features(self, text):
        with pytest.raises(UnsupportedFeature):
            parse_graph_query(text)

    @pytest.mark.parametrize(
        "text",
        [
            "RETURN n.id",
            "MATCH (n {type:'table'})",
            "MATCH n RETURN n.id",
            "MATCH (n {kind:'table'}) RETURN n.id",
            "MATCH (n {type:'table', type:'name'}) RETURN n.id",
            "MATCH (n {type:'table'}) RETURN m.id",
            "MATCH (n {type:'table'}) RETURN n.label",
            "MATCH (n {type:'table'}) RETURN n",
            "MATCH (n {type:'table'}) RETURN",
            "MATCH (a {type:'table'})-[r:table_fclass]->(a) RETURN a.id",
            "MATCH (a {type:'table'}) junk RETURN a.id",
        ],
    )
    def test_syntax_errors(self, text):
        with pytest.raises(GraphQuerySyntax):
            parse_graph_query(text)

    def test_parse_serialize_identity_on_examples(self):
        for text in [
            "MATCH (n {type:'table'}) RETURN n.id",
            "MATCH (a {type:'table', id:'land'})-[r:table_fclass]->(b {type:'fclass'}) RETURN b.id",
            "MATCH (a) RETURN a.type, a.id",
        ]:
            query = parse_graph_query(text)
            assert parse_graph_query(query.serialize()) == query

    def test_parse_serialize_identity_random(self):
        rng = random.Random(13)
        node_types = [None, "database", "table", "fclass", "name"]
        edge_types = [
            "database_table", "table_fclass", "table_name",
            "database_table_reverse", "table_fclass_reverse", "table_name_reverse",
        ]
        ids = [None, "soil", "land", "Alter Garten", "bus-stop 7"]
        for trial in range(50):
            start = NodeSpec("a", rng.choice(node_types), rng.choice(ids))
            edge = end = None
            declared = ["a"]
            if rng.random() < 0.6:
                edge = EdgeSpec(rng.choice(edge_types), rng.choice(["r", ""]))
                end = NodeSpec("b", rng.choice(node_types), rng.choice(ids))
                declared.append("b")
            projections = tuple(
                Projection(rng.choice(declared), rng.choice(["type", "id"]))
                for _ in range(rng.randint(1, 3))
            )
            query = GraphQuery(start, projections, edge, end)
            assert parse_graph_query(query.serialize()) == query, trial


class TestRunGraphQuery:
    def test_all_table_nodes_in_ingest_order(self):
        graph = portal_store().graph
        query = parse_graph_query("MATCH (n {type:'table'}) RETURN n.id")
        assert run_graph_query(query, graph) == ["soil", "roads", "points", "area", "buildings"]

    def test_one_hop_category_values(self):
        graph = land_store().graph
        query = parse_graph_query(
            "MATCH (a {type:'table', id:'land'})-[r:table_fclass]->(b) RETURN b.id"
        )
        assert run_graph_query(query, graph) == ["park", "forest"]

    def test_reverse_edge(self):
        graph = land_store().graph
        query = parse_graph_query(
            "MATCH (a {type:'fclass', id:'park'})-[r:table_fclass_reverse]->(b) RETURN b.id"
        )
        assert run_graph_query(query, graph) == ["land"]

    def test_nonexistent_type_gives_empty_rows(self):
        query = parse_graph_query("MATCH (n {type:'nonexistent'}) RETURN n.id")
        assert run_graph_query(query, portal_store().graph) == []

    def test_unknown_edge_type(self):
        query = parse_graph_query("MATCH (a {type:'table'})-[r:table_category]->(b) RETURN b.id")
        with pytest.raises(UnknownEdgeType):
            run_graph_query(query, portal_store().graph)

    def test_two_projections_give_row_lists(self):
        graph = land_store().graph
        query = parse_graph_query(
            "MATCH (a {type:'table'})-[r:table_name]->(b) RETURN a.id, b.id"
        )
        rows = run_graph_query(query, graph)
        assert rows[0] == ["land", "Salinenhof"]
        assert len(rows) == 3

    def test_end_constraint_filters(self):
        graph = land_store().graph
        query = parse_graph_query(
            "MATCH (a {type:'table'})-[r:table_fclass]->(b {id:'park'}) RETURN b.id"
        )
        assert run_graph_query(query, graph) == ["park"]


def building_geoset():
    store = KnowledgeStore()
    store.ingest_geojson(
        "buildings",
        collection(
            feature(11.54, 48.16, "Krone-Villa", "building", 5),
            feature(11.55, 48.17, "Frauenkirche", "church", 6),
        ),
    )
    return store.table_geoset("buildings")


GEOSET = building_geoset()


class TestVariablesListing:
    def test_empty_session(self):
        assert variables_listing(FakeSession()) == "(no variables yet)"

    def test_geoset_and_filter_result(self):
        items = GEOSET.items()
        session = FakeSession(
            variables={
                "out_1": GEOSET,
                "out_2": FilterResult(GeoSet(items[:1]), GeoSet(items[1:])),
            }
        )
        listing = variables_listing(session)
        assert "out_1: id_list with 2 entities" in listing
        assert "out_2: geo_filter result (subject 1, object 1)" in listing


DATASET_PROMPT = "what are the datasets we have?"
TABLES_QUERY = "I will query the graph.\n```cypher\nMATCH (t {type:'table'}) RETURN t.id\n```"
TABLES_RESULT = 'Query result: ["soil", "roads", "points", "area", "buildings"]'
DATASET_ANSWER = (
    '"Explain result" Please tell me which one or more of these datasets you are '
    "interested in and what information you want to query.\n\n"
    "You have the following datasets in your database:\n"
    "1. soil\n2. roads\n3. points\n4. area\n5. buildings"
)


class TestExplain:
    def test_dataset_listing_flow(self):
        gw = gateway(
            (AgentRole.EXPLAINER, DATASET_PROMPT, TABLES_QUERY),
            (AgentRole.EXPLAINER, TABLES_RESULT, DATASET_ANSWER),
        )
        explainer = Explainer(gw, portal_store())
        result = explainer.explain(DATASET_PROMPT, FakeSession())
        assert result.kind == "text"
        for table in ("soil", "roads", "points", "area", "buildings"):
            assert table in result.text
        assert result.queries == (
            (
                "MATCH (t {type:'table'}) RETURN t.id",
                (("soil",), ("roads",), ("points",), ("area",), ("buildings",)),
            ),
        )
        assert gw.call_count == 2

    def test_marker_only_final_formats_rows(self):
        gw = gateway(
            (AgentRole.EXPLAINER, DATASET_PROMPT, TABLES_QUERY),
            (AgentRole.EXPLAINER, TABLES_RESULT, '"Explain result"'),
        )
        result = Explainer(gw, portal_store()).explain(DATASET_PROMPT, FakeSession())
        assert result.kind == "table"
        assert result.text == "1. soil\n2. roads\n3. points\n4. area\n5. buildings"
        assert result.payload == ["soil", "roads", "points", "area", "buildings"]

    def test_chart_flow(self):
        prompt = "Can you draw me a diagram for area distribution of buildings you searched?"
        action = {
            "action": "chart",
            "kind": "histogram",
            "variable": "out_1",
            "measure": "area",
            "title": "Area distribution of buildings",
            "x_label": "area (m2)",
        }
        reply = f"Using variable out_1.\n```json\n{json.dumps(action)}\n```"
        gw = gateway((AgentRole.EXPLAINER, prompt, reply))
        session = FakeSession(variables={"out_1": GEOSET})
        result = Explainer(gw, portal_store()).explain(prompt, session)
        assert result.kind == "chart"
        chart = result.payload
        assert isinstance(chart, ChartSpec)
        assert sum(chart.counts) == len(GEOSET)
        assert chart.title == "Area distribution of buildings"
        assert all(edge > 0 for edge in chart.bin_edges)

    def test_chart_over_filter_result_uses_subject(self):
        prompt = "histogram please"
        items = GEOSET.items()
        action = {"action": "chart", "kind": "histogram", "variable": "out_3",
                  "measure": "area", "title": "t", "x_label": "x"}
        reply = f"```json\n{json.dumps(action)}\n```"
        gw = gateway((AgentRole.EXPLAINER, prompt, reply))
        session = FakeSession(variables={"out_3": FilterResult(GeoSet(items[:1]), GeoSet(items))})
        result = Explainer(gw, portal_store()).explain(prompt, session)
        assert sum(result.payload.counts) == 1

    def test_bad_query_feedback_then_success(self):
        bad = "```cypher\nMATCH (a)-->(b)-->(c) RETURN c\n```"
        feedback = "Query failed: UnsupportedFeature: at most one hop per query"
        gw = gateway(
            (AgentRole.EXPLAINER, DATASET_PROMPT, bad),
            (AgentRole.EXPLAINER, feedback, TABLES_QUERY),
            (AgentRole.EXPLAINER, TABLES_RESULT, DATASET_ANSWER),
        )
        result = Explainer(gw, portal_store()).explain(DATASET_PROMPT, FakeSession())
        assert result.kind == "text"
        assert len(result.queries) == 1
        assert gw.call_count == 3

    def test_unknown_chart_variable_feedback(self):
        prompt = "chart it"
        action = {"action": "chart", "kind": "histogram", "variable": "ghost",
                  "measure": "area", "title": "", "x_label": ""}
        reply = f"```json\n{json.dumps(action)}\n```"
        feedback = "Chart failed: unknown variable 'ghost'; available: out_1"
        gw = gateway(
            (AgentRole.EXPLAINER, prompt, reply),
            (AgentRole.EXPLAINER, feedback, "There is no such variable stored."),
        )
        session = FakeSession(variables={"out_1": GEOSET})
        result = Explainer(gw, portal_store()).explain(prompt, session)
        assert result.kind == "text"
        assert gw.call_count == 2

    def test_plain_text_answer_with_empty_session(self):
        prompt = "what did we find before?"
        gw = gateway((AgentRole.EXPLAINER, prompt, "No prior results exist in this session."))
        result = Explainer(gw, portal_store()).explain(prompt, FakeSession())
        assert result.kind == "text"
        assert result.payload is None
        assert result.queries == ()

    def test_iteration_limit(self):
        gw = gateway(
            (AgentRole.EXPLAINER, DATASET_PROMPT, TABLES_QUERY),
            (AgentRole.EXPLAINER, TABLES_RESULT, TABLES_QUERY),
        )
        with pytest.raises(IterationLimit):
            Explainer(gw, portal_store()).explain(DATASET_PROMPT, FakeSession())
        assert gw.call_count == 5
