import json
import uuid

from fastapi.testclient import TestClient

from geoask.engine import Engine
from geoask.eval.fixtures import (
    collection,
    feature,
    fixture_places,
    portal_store,
    square,
    worked_store,
)
from geoask.eval.scripting import (
    BUILDINGS_PROMPT,
    CHART_PROMPT,
    DATASET_ANSWER,
    DATASET_PROMPT,
    WORKED_PROMPT,
    WORKED_STEP_DESCRIPTIONS,
    analyzer_query_entries,
    demo_transcript,
    record_all,
)
from geoask.llm import ScriptedGateway
from geoask.planner import RelationSpec
from geoask.region import FixtureGeocoder
from geoask.service import create_app

KIOSK_PROMPT = "all kiosks in Maxvorstadt"
KIOSK_SPEC = RelationSpec(entities=("kiosks",), relations=(), region="Maxvorstadt")
KIOSK_PLAN = (
    "# Set the bounding box to Maxvorstadt\n"
    'set_bounding_box("Maxvorstadt")\n'
    "# Get the id_list of kiosks\n"
    'out_1 = id_list_of_entity("kiosk")\n'
)


def demo_plus_kiosk():
    transcript = demo_transcript()
    record_all(transcript, analyzer_query_entries(KIOSK_PROMPT, KIOSK_SPEC, KIOSK_PLAN))
    return transcript


def worked_client() -> TestClient:
    engine = Engine(
        ScriptedGateway(demo_plus_kiosk()),
        worked_store(),
        FixtureGeocoder(fixture_places()),
    )
    return TestClient(create_app(engine))


def portal_client() -> TestClient:
    engine = Engine(
        ScriptedGateway(demo_transcript()),
        portal_store(),
        FixtureGeocoder(fixture_places()),
    )
    return TestClient(create_app(engine))


def post_query(client, prompt, session="s1"):
    return client.post("/api/query", json={"session_id": session, "prompt": prompt})


def layer_names(body):
    return [layer["layer_name"] for layer in body["layers"]]


def kiosk_collection():
    return collection([feature(square(11.56, 48.15), "Kiosk am Platz", "kiosk", 777001)])


class TestQueryEndpoint:
    def test_worked_example_response(self):
        client = worked_client()
        resp = post_query(client, WORKED_PROMPT)
        assert resp.status_code == 200
        body = resp.json()
        assert body["kind"] == "layers"
        assert body["message"] == "2 results have been visualized on the map."
        assert [s["description"] for s in body["steps"]] == list(
            WORKED_STEP_DESCRIPTIONS
        )
        assert [s["index"] for s in body["steps"]] == [1, 2, 3, 4, 5]
        assert set(layer_names(body)) == {"buildings/building", "land/park"}
        by_name = {layer["layer_name"]: layer["features"] for layer in body["layers"]}
        assert [f["display_name"] for f in by_name["buildings/building"]] == [
            "Krone-Villa"
        ]
        assert [f["display_name"] for f in by_name["land/park"]] == ["Salinenhof"]
        for layer in body["layers"]:
            for feat in layer["features"]:
                assert feat["wkt"].startswith("POLYGON")
                assert feat["key"].count("_") >= 3
        assert body["chart"] is None
        assert body["usage"]["input_tokens"] > 0

    def test_every_step_id_dereferences(self):
        client = worked_client()
        body = post_query(client, WORKED_PROMPT).json()
        assert len(body["steps"]) == 5
        for step in body["steps"]:
            got = client.get(f"/api/steps/{step['step_id']}")
            assert got.status_code == 200
            assert got.json()["description"] == step["description"]

    def test_dataset_listing(self):
        client = portal_client()
        resp = post_query(client, DATASET_PROMPT)
        assert resp.status_code == 200
        body = resp.json()
        assert body["kind"] == "text"
        assert body["message"] == DATASET_ANSWER
        assert body["steps"] == []
        assert body["layers"] == []
        assert body["chart"] is None

    def test_chart_flow(self):
        client = worked_client()
        assert post_query(client, BUILDINGS_PROMPT).status_code == 200
        resp = post_query(client, CHART_PROMPT)
        body = resp.json()
        assert body["kind"] == "chart"
        assert body["chart"]["kind"] == "histogram"
        assert sum(body["chart"]["counts"]) == 2
        assert len(body["chart"]["bin_edges"]) == len(body["chart"]["counts"]) + 1
        assert body["layers"] == []

    def test_sessions_isolated(self):
        client = worked_client()
        first = post_query(client, BUILDINGS_PROMPT, session="alpha").json()
        second = post_query(client, BUILDINGS_PROMPT, session="beta").json()
        assert first["steps"][0]["step_id"] == "alpha:1:1"
        assert second["steps"][0]["step_id"] == "beta:1:1"
        assert first["layers"] == second["layers"]

    def test_missing_session_id_defaults(self):
        client = worked_client()
        resp = client.post("/api/query", json={"prompt": BUILDINGS_PROMPT})
        assert resp.status_code == 200
        assert resp.json()["steps"][0]["step_id"].startswith("default:")

    def test_scripted_replay_byte_identical(self):
        def run_bytes():
            client = worked_client()
            a = post_query(client, WORKED_PROMPT).content
            b = post_query(client, BUILDINGS_PROMPT, session="s2").content
            c = post_query(client, CHART_PROMPT, session="s2").content
            return a + b + c

        assert run_bytes() == run_bytes()

    def test_empty_prompt_rejected(self):
        client = worked_client()
        for prompt in ("", "   "):
            resp = post_query(client, prompt)
            assert resp.status_code == 400

    def test_malformed_bodies_rejected(self):
        client = worked_client()
        assert client.post("/api/query", json={}).status_code == 400
        assert client.post("/api/query", json=[1, 2]).status_code == 400
        assert client.post("/api/query", json={"prompt": 7}).status_code == 400
        assert (
            client.post(
                "/api/query",
                json={"prompt": "hi", "session_id": 5},
            ).status_code
            == 400
        )
        raw = client.post(
            "/api/query",
            content=b"{nope",
            headers={"Content-Type": "application/json"},
        )
        assert raw.status_code == 400

    def test_backend_miss_is_502(self):
        client = worked_client()
        resp = post_query(client, "a prompt nobody scripted")
        assert resp.status_code == 502
        assert "TranscriptMiss" in resp.json()["detail"]

    def test_domain_failure_is_200_error_kind(self):
        from geoask.eval.scripting import directive_reply
        from geoask.llm import Transcript
        from geoask.prompts import AgentRole

        prompt = "show me the quiet zones in Maxvorstadt"
        spec = RelationSpec(entities=("quiet zones",), relations=(), region="Maxvorstadt")
        code = (
            "# Set the bounding box to Maxvorstadt\n"
            'set_bounding_box("Maxvorstadt")\n'
            "# Get the id_list of quiet zones\n"
            'out_1 = id_list_of_entity("quiet zone")\n'
        )
        transcript = Transcript()
        record_all(transcript, analyzer_query_entries(prompt, spec, code))
        transcript.record(
            AgentRole.BBOX_MODIFIER, "Maxvorstadt", directive_reply("Maxvorstadt")
        )
        transcript.record(
            AgentRole.INTENT_MATCHER,
            'query: "quiet zone"\nmatched: []',
            'no match\n```json\n{"named_entity": false, "valid_pairs": [], "table": ""}\n```',
        )
        engine = Engine(
            ScriptedGateway(transcript), worked_store(), FixtureGeocoder(fixture_places())
        )
        client = TestClient(create_app(engine))
        resp = post_query(client, prompt)
        assert resp.status_code == 200
        body = resp.json()
        assert body["kind"] == "error"
        assert "step 2 failed" in body["message"]
        assert len(body["steps"]) == 1


class TestStepEndpoint:
    def test_parks_step_snapshot(self):
        client = worked_client()
        body = post_query(client, WORKED_PROMPT).json()
        parks = client.get(f"/api/steps/{body['steps'][1]['step_id']}").json()
        assert parks["description"] == "Get the id_list of parks"
        assert layer_names(parks) == ["land/park"]
        names = {f["display_name"] for f in parks["layers"][0]["features"]}
        assert names == {"Salinenhof", "Alter Botanischer Garten"}

    def test_filter_step_keeps_both_sides(self):
        client = worked_client()
        body = post_query(client, WORKED_PROMPT).json()
        filtered = client.get(f"/api/steps/{body['steps'][3]['step_id']}").json()
        by_name = {
            layer["layer_name"]: layer["features"] for layer in filtered["layers"]
        }
        assert [f["display_name"] for f in by_name["buildings/building"]] == [
            "Krone-Villa"
        ]

    def test_bbox_step_snapshot(self):
        client = worked_client()
        body = post_query(client, WORKED_PROMPT).json()
        box = client.get(f"/api/steps/{body['steps'][0]['step_id']}").json()
        assert layer_names(box) == ["session/bbox"]
        assert box["layers"][0]["features"][0]["display_name"] == "Munich Maxvorstadt"

    def test_unknown_step_404(self):
        client = worked_client()
        assert client.get(f"/api/steps/{uuid.uuid4()}").status_code == 404
        assert client.get("/api/steps/s1:9:9").status_code == 404


class TestDataEndpoint:
    def test_upload_then_query(self):
        client = worked_client()
        payload = json.dumps(kiosk_collection()).encode()
        resp = client.post(
            "/api/data",
            data={"name": "shops"},
            files={"file": ("shops.geojson", payload, "application/json")},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["dataset"] == "shops"
        assert body["features"] == 1
        assert body["stored"] == 1
        assert body["skipped"] == []
        follow = post_query(client, KIOSK_PROMPT)
        assert follow.status_code == 200
        follow_body = follow.json()
        assert follow_body["kind"] == "layers"
        assert layer_names(follow_body) == ["shops/kiosk"]
        assert (
            follow_body["layers"][0]["features"][0]["display_name"] == "Kiosk am Platz"
        )

    def test_duplicate_upload_idempotent(self):
        client = worked_client()
        payload = json.dumps(kiosk_collection()).encode()

        def upload():
            return client.post(
                "/api/data",
                data={"name": "shops"},
                files={"file": ("shops.geojson", payload, "application/json")},
            ).json()

        first = upload()
        second = upload()
        assert first["digest"] == second["digest"]
        assert first["features"] == second["features"]

    def test_not_a_feature_collection_422(self):
        client = worked_client()
        payload = json.dumps({"type": "Feature"}).encode()
        resp = client.post(
            "/api/data",
            data={"name": "shops"},
            files={"file": ("f.geojson", payload, "application/json")},
        )
        assert resp.status_code == 422
        assert "NotFeatureCollection" in resp.json()["detail"]

    def test_malformed_json_422(self):
        client = worked_client()
        resp = client.post(
            "/api/data",
            data={"name": "shops"},
            files={"file": ("f.geojson", b"{nope", "application/json")},
        )
        assert resp.status_code == 422

    def test_underscore_dataset_name_422(self):
        client = worked_client()
        payload = json.dumps(kiosk_collection()).encode()
        resp = client.post(
            "/api/data",
            data={"name": "bad_name"},
            files={"file": ("f.geojson", payload, "application/json")},
        )
        assert resp.status_code == 422

    def test_missing_fields_rejected(self):
        client = worked_client()
        assert client.post("/api/data", data={"name": "shops"}).status_code == 422


class TestUiMount:
    def test_serves_index_and_assets_next_to_the_api(self, tmp_path):
        from geoask.service import mount_ui

        (tmp_path / "index.html").write_text("<!doctype html><title>portal</title>")
        (tmp_path / "app.js").write_text("console.log('ready');")
        gateway = ScriptedGateway(demo_transcript())
        engine = Engine(gateway, worked_store(), FixtureGeocoder(fixture_places()))
        app = create_app(engine)
        mount_ui(app, str(tmp_path))
        client = TestClient(app)

        page = client.get("/")
        assert page.status_code == 200
        assert "portal" in page.text
        assert client.get("/app.js").status_code == 200
        resp = post_query(client, WORKED_PROMPT)
        assert resp.status_code == 200
        descriptions = [s["description"] for s in resp.json()["steps"]]
        assert descriptions == list(WORKED_STEP_DESCRIPTIONS)

    def test_missing_index_is_an_error(self, tmp_path):
        from geoask.service import mount_ui

        gateway = ScriptedGateway(demo_transcript())
        engine = Engine(gateway, worked_store(), FixtureGeocoder(fixture_places()))
        app = create_app(engine)
        try:
            mount_ui(app, str(tmp_path))
        except FileNotFoundError as exc:
            assert "index.html" in str(exc)
        else:
            raise AssertionError("expected FileNotFoundError")
