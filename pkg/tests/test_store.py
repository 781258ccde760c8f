import hashlib
import json

import numpy as np
import pytest

from geoask.errors import (
    BackendUnavailable,
    EmptyIndex,
    EmptyText,
    KeyParseError,
    NotFeatureCollection,
    UnknownTable,
)
from geoask.geometry import BoundingBox
from geoask.store import (
    CandidateMatch,
    HashEmbedder,
    KnowledgeStore,
    LiveEmbedder,
    RecordedEmbedder,
    SchemaGraph,
    VectorIndex,
    VectorRecord,
)


# Independent route to the trigram-hash embedding: bucket counts kept in a
# dict instead of an array, cosine computed from the sparse form.
def trigram_buckets(text):
    buckets = {}
    for token in "".join(c.lower() if c.isalnum() else " " for c in text).split():
        padded = f"#{token}#"
        for i in range(len(padded) - 2):
            tri = padded[i : i + 3]
            slot = (
                int.from_bytes(hashlib.sha1(tri.encode()).digest()[:4], "big") % 256
            )
            buckets[slot] = buckets.get(slot, 0) + 1
    return buckets


def oracle_cosine(a, b):
    ba, bb = trigram_buckets(a), trigram_buckets(b)
    dot = sum(v * bb.get(k, 0) for k, v in ba.items())
    na = sum(v * v for v in ba.values()) ** 0.5
    nb = sum(v * v for v in bb.values()) ** 0.5
    return dot / (na * nb)


def poly(lon, lat, d=0.001):
    return {
        "type": "Polygon",
        "coordinates": [
            [
                [lon, lat],
                [lon + d, lat],
                [lon + d, lat + d],
                [lon, lat + d],
                [lon, lat],
            ]
        ],
    }


def feature(geometry, name=None, fclass=None, osm_id=None):
    props = {}
    if name is not None:
        props["name"] = name
    if fclass is not None:
        props["fclass"] = fclass
    if osm_id is not None:
        props["osm_id"] = osm_id
    return {"type": "Feature", "geometry": geometry, "properties": props}


def collection(*features):
    return {"type": "FeatureCollection", "features": list(features)}


DEMO_PARKS = collection(
    feature(poly(11.56, 48.15), name="A", fclass="park"),
    feature(poly(11.57, 48.151), name="B", fclass="park"),
)


def mini_portal():
    """Small multi-table store exercising the lookup examples."""
    store = KnowledgeStore()
    store.ingest_geojson(
        "soil",
        collection(
            feature(
                poly(11.50, 48.12),
                name="loam soils with rich nutrients and good drainage",
                fclass="loam",
                osm_id=9001,
            ),
            feature(poly(11.51, 48.13), name="clay belt", fclass="clay", osm_id=9002),
        ),
    )
    store.ingest_geojson(
        "land",
        collection(
            feature(poly(11.56, 48.14), name="Salinenhof", fclass="park", osm_id=17978461),
            feature(poly(11.57, 48.15), name="Alter Botanischer Garten", fclass="park", osm_id=17978462),
            feature(poly(11.58, 48.16), name="Hofgarten", fclass="meadow", osm_id=17978463),
        ),
    )
    store.ingest_geojson(
        "area",
        collection(
            feature(poly(11.54, 48.14), name="Theresienwiese", fclass="grass", osm_id=5001),
            feature(poly(11.55, 48.15), name="Nordfeld", fclass="meadow", osm_id=5002),
        ),
    )
    store.ingest_geojson(
        "buildings",
        collection(
            feature(poly(11.572, 48.145), name="Krone-Villa", fclass="building", osm_id=153292452),
            feature(
                poly(11.573, 48.146),
                name="Physiotherapie Kinder und Erwachsene",
                fclass="building",
                osm_id=93216444,
            ),
            feature(poly(11.574, 48.147), name="Frauenkirche", fclass="church", osm_id=7001),
            feature(poly(11.575, 48.148), name="Frauenkirche", fclass="church", osm_id=7002),
        ),
    )
    return store


class TestHashEmbedder:
    def test_deterministic(self):
        emb = HashEmbedder()
        v1 = emb.embed("park")
        v2 = emb.embed("park")
        assert np.array_equal(v1, v2)

    def test_self_cosine_is_one(self):
        emb = HashEmbedder()
        v = emb.embed("greenery spaces")
        assert abs(float(v @ v) - 1.0) <= 1e-6

    def test_unit_norm(self):
        emb = HashEmbedder()
        for text in ["park", "a", "Physiotherapie Kinder und Erwachsene", "qzx 12"]:
            assert abs(np.linalg.norm(emb.embed(text)) - 1.0) <= 1e-6

    def test_matches_independent_oracle(self):
        emb = HashEmbedder()
        for a, b in [("park", "parks"), ("park", "qzx"), ("meadow", "meadows")]:
            got = float(emb.embed(a) @ emb.embed(b))
            assert got == pytest.approx(oracle_cosine(a, b), abs=1e-9)

    def test_surface_similarity_beats_noise(self):
        emb = HashEmbedder()
        park, parks, qzx = emb.embed("park"), emb.embed("parks"), emb.embed("qzx")
        assert float(park @ parks) > float(park @ qzx)
        # Same inequality through the independent route.
        assert oracle_cosine("park", "parks") > oracle_cosine("park", "qzx")

    def test_empty_text(self):
        with pytest.raises(EmptyText):
            HashEmbedder().embed("   ")

    def test_word_order_free(self):
        emb = HashEmbedder()
        assert np.array_equal(emb.embed("green space"), emb.embed("space green"))

    def test_call_counter(self):
        emb = HashEmbedder()
        emb.embed("a")
        emb.embed("b")
        assert emb.calls == 2


class TestRecordedEmbedder:
    def test_replays_frozen_vector(self):
        frozen = [1.0] + [0.0] * 255
        emb = RecordedEmbedder({"greenery spaces": frozen})
        got = emb.embed("Greenery   Spaces")
        assert got[0] == pytest.approx(1.0)
        assert np.linalg.norm(got) == pytest.approx(1.0)

    def test_falls_back_for_unknown_text(self):
        emb = RecordedEmbedder({})
        assert np.array_equal(emb.embed("park"), HashEmbedder().embed("park"))

    def test_normalizes_stored_vectors(self):
        emb = RecordedEmbedder({"x": [3.0, 4.0] + [0.0] * 254})
        assert np.linalg.norm(emb.embed("x")) == pytest.approx(1.0)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "recorded.json"
        path.write_text(json.dumps({"meadow": [0.5] * 4 + [0.0] * 252}))
        emb = RecordedEmbedder.load(path)
        assert np.linalg.norm(emb.embed("meadow")) == pytest.approx(1.0)


class _FakeResponse:
    def __init__(self, status_code, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload or {}
        self.text = text

    def json(self):
        return self._payload


class TestLiveEmbedder:
    def test_success(self, monkeypatch):
        seen = {}

        def fake_post(url, json=None, headers=None, timeout=None):
            seen["url"] = url
            seen["json"] = json
            return _FakeResponse(
                200, {"data": [{"embedding": [3.0, 4.0]}]}
            )

        import geoask.store as store_mod

        monkeypatch.setattr(store_mod.requests, "post", fake_post)
        emb = LiveEmbedder("http://backend/v1", api_key="k")
        vec = emb.embed("park")
        assert seen["url"] == "http://backend/v1/embeddings"
        assert seen["json"]["input"] == "park"
        assert np.linalg.norm(vec) == pytest.approx(1.0)
        assert emb.calls == 1

    def test_gives_up_after_retries(self, monkeypatch):
        attempts = []

        def fake_post(url, json=None, headers=None, timeout=None):
            attempts.append(url)
            return _FakeResponse(500)

        import geoask.store as store_mod

        monkeypatch.setattr(store_mod.requests, "post", fake_post)
        emb = LiveEmbedder("http://backend/v1", retry_limit=2, sleeper=lambda _: None)
        with pytest.raises(BackendUnavailable):
            emb.embed("park")
        assert len(attempts) == 3


class TestVectorIndex:
    def build(self, values):
        emb = HashEmbedder()
        index = VectorIndex()
        for kind, table, text in values:
            index.add(VectorRecord(text, kind, table), emb.embed(text))
        return index, emb

    def test_duplicate_triple_rejected(self):
        index, emb = self.build([("table", "land", "land")])
        assert not index.add(VectorRecord("land", "table", "land"), emb.embed("land"))
        assert len(index) == 1

    def test_same_text_different_table_kept(self):
        index, emb = self.build([("category", "land", "park")])
        assert index.add(VectorRecord("park", "category", "points"), emb.embed("park"))
        assert len(index) == 2

    def test_exact_value_ranks_first_with_unit_score(self):
        index, emb = self.build(
            [
                ("category", "land", "park"),
                ("category", "land", "meadow"),
                ("category", "land", "forest"),
            ]
        )
        top = index.search(emb.embed("meadow"), k=3)[0]
        assert top.value == "meadow"
        assert top.score == pytest.approx(1.0, abs=1e-6)

    def test_never_more_than_k(self):
        rows = [("entry_name", "b", f"name{i}") for i in range(30)]
        index, emb = self.build(rows)
        assert len(index.search(emb.embed("name1"), k=7)) == 7

    def test_descending_scores_and_lexicographic_ties(self):
        emb = HashEmbedder()
        index = VectorIndex()
        shared = emb.embed("park")
        # Two records sharing one vector tie exactly.
        index.add(VectorRecord("beta", "category", "t"), shared)
        index.add(VectorRecord("alpha", "category", "t"), shared)
        index.add(VectorRecord("park", "category", "t"), emb.embed("park"))
        results = index.search(emb.embed("park"), k=10)
        scores = [m.score for m in results]
        assert scores == sorted(scores, reverse=True)
        tied = [m.value for m in results if m.score == pytest.approx(scores[0])]
        assert tied == sorted(tied)

    def test_scope_and_kind_restriction(self):
        index, emb = self.build(
            [
                ("category", "land", "park"),
                ("category", "points", "park bench"),
                ("entry_name", "land", "parkside house"),
            ]
        )
        scoped = index.search(emb.embed("park"), scope="land")
        assert all(m.table == "land" for m in scoped)
        kinds = index.search(emb.embed("park"), kinds={"entry_name"})
        assert all(m.kind == "entry_name" for m in kinds)

    def test_empty_index_raises(self):
        index = VectorIndex()
        with pytest.raises(EmptyIndex):
            index.search(HashEmbedder().embed("park"))

    def test_empty_scope_raises(self):
        index, emb = self.build([("category", "land", "park")])
        with pytest.raises(EmptyIndex):
            index.search(emb.embed("park"), scope="missing")


class TestSchemaGraph:
    def test_reverse_edge_created(self):
        graph = SchemaGraph()
        a = graph.add_node("database", "demo")
        b = graph.add_node("table", "demo")
        graph.add_edge("database_table", a, b)
        assert graph.neighbors(a, "database_table") == [b]
        assert graph.neighbors(b, "database_table_reverse") == [a]

    def test_exactly_one_reverse_per_edge(self):
        graph = SchemaGraph()
        a = graph.add_node("table", "land")
        b = graph.add_node("fclass", "park")
        graph.add_edge("table_fclass", a, b)
        graph.add_edge("table_fclass", a, b)
        forward = [e for e in graph.edges() if e[0] == "table_fclass"]
        backward = [e for e in graph.edges() if e[0] == "table_fclass_reverse"]
        assert len(forward) == 1 and len(backward) == 1

    def test_out_then_back_returns_to_start(self):
        graph = SchemaGraph()
        a = graph.add_node("table", "land")
        b = graph.add_node("name", "Salinenhof")
        graph.add_edge("table_name", a, b)
        for edge_type, source, target in graph.edges():
            back = (
                edge_type[: -len("_reverse")]
                if edge_type.endswith("_reverse")
                else edge_type + "_reverse"
            )
            assert source in graph.neighbors(target, back)

    def test_unknown_node_rejected(self):
        graph = SchemaGraph()
        a = graph.add_node("table", "land")
        with pytest.raises(KeyError):
            graph.add_edge("table_name", a, ("name", "ghost"))

    def test_json_round_trip(self):
        graph = SchemaGraph()
        a = graph.add_node("database", "demo")
        b = graph.add_node("table", "demo")
        c = graph.add_node("name", "A")
        graph.add_edge("database_table", a, b)
        graph.add_edge("table_name", b, c)
        clone = SchemaGraph.from_jsonable(graph.to_jsonable())
        assert sorted(clone.nodes()) == sorted(graph.nodes())
        assert clone.edges() == graph.edges()


class TestIngest:
    def test_demo_two_parks(self):
        store = KnowledgeStore()
        report = store.ingest_geojson("demo", DEMO_PARKS)
        assert report.features == 2
        assert report.skipped == []
        assert report.stored() == 2
        assert store.graph.nodes("database") == [("database", "demo")]
        assert store.graph.nodes("table") == [("table", "demo")]
        assert sorted(store.graph.nodes("name")) == [("name", "A"), ("name", "B")]

    def test_null_geometry_skipped(self):
        store = KnowledgeStore()
        doc = collection(
            feature(poly(11.56, 48.15), name="A", fclass="park"),
            feature(None, name="ghost", fclass="park"),
            feature(poly(11.57, 48.151), name="B", fclass="park"),
        )
        report = store.ingest_geojson("demo", doc)
        assert report.features == 3
        assert len(report.skipped) == 1
        index, reason = report.skipped[0]
        assert index == 1 and "geometry" in reason
        assert report.stored() == 2
        assert len(store.table_geoset("demo")) == 2

    def test_features_equals_stored_plus_skipped(self):
        store = KnowledgeStore()
        doc = collection(
            feature(poly(11.56, 48.15), name="A"),
            feature(None, name="ghost"),
            {"type": "Feature", "geometry": {"type": "Point"}, "properties": {}},
        )
        report = store.ingest_geojson("demo", doc)
        assert report.features == report.stored() + len(report.skipped)

    def test_reingest_is_idempotent_with_running_ids(self):
        store = KnowledgeStore()
        store.ingest_geojson("demo", DEMO_PARKS)
        before = store.digest()
        store.ingest_geojson("demo", DEMO_PARKS)
        assert store.digest() == before
        assert len(store.table_geoset("demo")) == 2

    def test_reingest_is_idempotent_with_osm_ids(self):
        store = mini_portal()
        before = store.digest()
        store.ingest_geojson(
            "land",
            collection(
                feature(poly(11.56, 48.14), name="Salinenhof", fclass="park", osm_id=17978461),
                feature(poly(11.57, 48.15), name="Alter Botanischer Garten", fclass="park", osm_id=17978462),
                feature(poly(11.58, 48.16), name="Hofgarten", fclass="meadow", osm_id=17978463),
            ),
        )
        assert store.digest() == before

    def test_osm_id_used_in_key(self):
        store = mini_portal()
        keys = [k.encode() for k in store.table_geoset("land")]
        assert "land_park_Salinenhof_17978461" in keys

    def test_not_feature_collection(self):
        store = KnowledgeStore()
        with pytest.raises(NotFeatureCollection):
            store.ingest_geojson("demo", {"type": "Feature"})
        with pytest.raises(NotFeatureCollection):
            store.ingest_geojson("demo", {"type": "FeatureCollection"})

    def test_dataset_name_with_underscore_rejected(self):
        store = KnowledgeStore()
        with pytest.raises(KeyParseError):
            store.ingest_geojson("my_data", DEMO_PARKS)

    def test_underscored_category_sanitized_in_key_only(self):
        store = KnowledgeStore()
        store.ingest_geojson(
            "points",
            collection(feature(poly(11.56, 48.15), name="stop 1", fclass="bus_stop", osm_id=1)),
        )
        key = store.table_geoset("points").keys()[0]
        assert key.type_name == "bus-stop"
        assert ("fclass", "bus_stop") in store.graph.nodes("fclass")

    def test_unnamed_feature_gets_placeholder(self):
        store = KnowledgeStore()
        store.ingest_geojson(
            "demo", collection(feature(poly(11.56, 48.15), fclass="park"))
        )
        key = store.table_geoset("demo").keys()[0]
        assert key.name == "unnamed"

    def test_each_key_resolves_to_one_database_table_pair(self):
        store = mini_portal()
        for table in store.tables():
            for key in store.table_geoset(table):
                table_ref = ("table", key.database)
                owners = store.graph.neighbors(table_ref, "database_table_reverse")
                assert owners == [("database", key.database)]

    def test_value_nodes_link_to_a_table(self):
        store = mini_portal()
        for node_type, edge in [("fclass", "table_fclass_reverse"), ("name", "table_name_reverse")]:
            for ref in store.graph.nodes(node_type):
                assert len(store.graph.neighbors(ref, edge)) >= 1

    def test_embedded_values_counts_distinct(self):
        store = KnowledgeStore()
        report = store.ingest_geojson("demo", DEMO_PARKS)
        # table "demo" + category "park" + names "A" and "B"
        assert report.embedded_values == 4
        second = store.ingest_geojson("demo", DEMO_PARKS)
        assert second.embedded_values == 0


class TestKeywordLookup:
    def test_table_name_match(self):
        store = mini_portal()
        assert store.keyword_lookup("building") == [("table", "buildings", "building")]

    def test_farming_text_matches_soil_and_area(self):
        store = mini_portal()
        hits = store.keyword_lookup("areas with the best soil for farming")
        tables = [(kind, table) for kind, table, _ in hits if kind == "table"]
        assert tables == [("table", "soil"), ("table", "area")]

    def test_greenery_spaces_matches_nothing(self):
        store = mini_portal()
        assert store.keyword_lookup("greenery spaces") == []

    def test_category_and_name_hits(self):
        store = mini_portal()
        hits = store.keyword_lookup("show me the parks")
        assert ("category", "land", "park") in hits
        hits = store.keyword_lookup("where is the Krone-Villa")
        assert ("entry_name", "buildings", "Krone-Villa") in hits

    def test_exact_keyword(self):
        store = mini_portal()
        assert store.exact_keyword("Buildings") == [("table", "buildings", "building")]
        assert store.exact_keyword("best soil") == []

    def test_empty_term(self):
        store = mini_portal()
        assert store.keyword_lookup("") == []

    def test_duplicate_names_report_once(self):
        store = mini_portal()
        hits = store.keyword_lookup("Frauenkirche")
        assert hits.count(("entry_name", "buildings", "Frauenkirche")) == 1


class TestSimilaritySearch:
    def test_indexed_value_first(self):
        store = mini_portal()
        top = store.similarity_search("meadow", kinds={"category"})[0]
        assert top.value == "meadow"
        assert top.score == pytest.approx(1.0, abs=1e-6)

    def test_scope_and_kind_never_violated(self):
        store = mini_portal()
        for match in store.similarity_search("park", scope="land", k=10):
            assert match.table == "land"
        for match in store.similarity_search("park", kinds={"entry_name"}, k=10):
            assert match.kind == "entry_name"

    def test_prefix_query_finds_related_names(self):
        store = mini_portal()
        values = [m.value for m in store.similarity_search("Theresien", kinds={"entry_name"}, k=5)]
        assert "Theresienwiese" in values

    def test_k_cap(self):
        store = mini_portal()
        assert len(store.similarity_search("park", k=3)) <= 3

    def test_match_serialization(self):
        match = CandidateMatch("category", "land", "park", 0.87654321)
        assert match.as_dict() == {
            "kind": "category",
            "table": "land",
            "value": "park",
            "score": 0.876543,
        }


class TestGetGeometries:
    def test_category_filter_inside_box(self):
        store = mini_portal()
        box = BoundingBox(48.13, 48.17, 11.55, 11.60)
        parks = store.get_geometries("land", category="park", box=box)
        keys = [k.encode() for k in parks]
        assert "land_park_Salinenhof_17978461" in keys
        assert all(k.type_name == "park" for k in parks)

    def test_names_filter_case_insensitive(self):
        store = mini_portal()
        got = store.get_geometries("buildings", names={"krone-villa"})
        assert [k.encode() for k in got] == ["buildings_building_Krone-Villa_153292452"]

    def test_box_excludes_outside(self):
        store = mini_portal()
        far = BoundingBox(40.0, 40.1, 10.0, 10.1)
        assert len(store.get_geometries("land", box=far)) == 0

    def test_unknown_table(self):
        store = mini_portal()
        with pytest.raises(UnknownTable):
            store.get_geometries("xyz")

    def test_no_filters_returns_all(self):
        store = mini_portal()
        assert len(store.get_geometries("land")) == 3

    def test_duplicate_name_rows_both_returned(self):
        store = mini_portal()
        got = store.get_geometries("buildings", names={"Frauenkirche"})
        assert len(got) == 2


class TestStoreFacade:
    def test_tables_in_ingest_order(self):
        store = mini_portal()
        assert store.tables() == ["soil", "land", "area", "buildings"]

    def test_database_of(self):
        store = mini_portal()
        assert store.database_of("land") == "land"
        with pytest.raises(UnknownTable):
            store.database_of("nope")

    def test_sample_values(self):
        store = mini_portal()
        assert store.sample_values("land", "category") == ["park", "meadow"]
        assert "Salinenhof" in store.sample_values("land", "entry_name")
        assert len(store.sample_values("buildings", "entry_name", limit=2)) == 2

    def test_persistence_round_trip(self, tmp_path):
        store = mini_portal()
        store.save(tmp_path)
        loaded = KnowledgeStore.load(tmp_path)
        assert loaded.digest() == store.digest()
        assert loaded.tables() == store.tables()
        assert loaded.keyword_lookup("building") == store.keyword_lookup("building")
        assert loaded.get_geometries("land", category="park") == store.get_geometries(
            "land", category="park"
        )
        got = loaded.similarity_search("meadow", kinds={"category"})[0]
        assert got.value == "meadow"

    def test_digest_changes_with_content(self):
        store = KnowledgeStore()
        store.ingest_geojson("demo", DEMO_PARKS)
        before = store.digest()
        store.ingest_geojson(
            "demo", collection(feature(poly(11.58, 48.152), name="C", fclass="park"))
        )
        assert store.digest() != before
