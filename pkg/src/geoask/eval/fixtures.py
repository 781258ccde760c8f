"""Deterministic fixture data: micro-city, five-table portal, synthetic city.

Everything here is plain data construction. The micro-city backs the
worked buildings-near-parks walkthrough, the portal fixture backs the
dataset-listing and retrieval traces, and ``synthetic_city`` generates a
seeded ~2,000-feature town for the evaluation harness.
"""

from __future__ import annotations

import random
from typing import Dict, List, Optional

from ..store import HashEmbedder, KnowledgeStore, RecordedEmbedder

MAXVORSTADT_BOX = [48.139603, 48.157637, 11.538923, 11.588192]
OLD_TOWN_BOX = [48.129, 48.1425, 11.565, 11.585]
MUNICH_BOX = [48.061624, 48.248216, 11.360796, 11.7221]

FARMING_QUERY = "areas with the best soil for farming"
LOAM_ROW = "loam soils with rich nutrients and good drainage"
CLAY_ROW = "clay belt"
LOAM_REWRITE = (
    "Regions with loam soils characterized by rich nutrients, "
    "good drainage, and moisture retention"
)

# Frozen semantic stand-ins for queries whose meaning the trigram embedding
# backend cannot see (no shared character trigrams with their neighbors).
RECORDED_GLOSSES = {
    "greenery spaces": "grass grassy meadow meadows lawn turf green greenery",
    FARMING_QUERY: "farmland agriculture fertile cropland harvest",
}


def recorded_embedder() -> RecordedEmbedder:
    """Deterministic embedder with recorded vectors for the gloss queries."""
    base = HashEmbedder()
    mapping = {text: base.embed(gloss).tolist() for text, gloss in RECORDED_GLOSSES.items()}
    return RecordedEmbedder(mapping)


def square(lon: float, lat: float, d: float = 0.001) -> dict:
    ring = [[lon, lat], [lon + d, lat], [lon + d, lat + d], [lon, lat + d], [lon, lat]]
    return {"type": "Polygon", "coordinates": [ring]}


def feature(
    geometry: dict,
    name: Optional[str] = None,
    fclass: Optional[str] = None,
    osm_id: Optional[int] = None,
) -> dict:
    props: Dict[str, object] = {}
    if name is not None:
        props["name"] = name
    if fclass is not None:
        props["fclass"] = fclass
    if osm_id is not None:
        props["osm_id"] = osm_id
    return {"type": "Feature", "geometry": geometry, "properties": props}


def collection(features: List[dict]) -> dict:
    return {"type": "FeatureCollection", "features": features}


def worked_city() -> Dict[str, dict]:
    """Tables for the buildings-near-parks walkthrough.

    Inside the Maxvorstadt box, exactly one building (Krone-Villa, ~37 m
    east of the Salinenhof park) falls within the 100 m belt; the second
    building is ~860 m from the nearest park. Ostpark lies outside the box
    so bounded and global searches differ. The Frauenkirche pair (an
    attraction and a church building sharing the name) sits in the Old
    Town box for the name-search walkthrough.
    """
    return {
        "land": collection(
            [
                feature(square(11.566, 48.145), "Salinenhof", "park", 17978461),
                feature(square(11.540, 48.152), "Alter Botanischer Garten", "park", 17978462),
                feature(square(11.620, 48.110), "Ostpark", "park", 17978470),
                feature(square(11.545, 48.143), "Hofgarten", "forest", 17978463),
            ]
        ),
        "buildings": collection(
            [
                feature(square(11.5675, 48.1455), "Krone-Villa", "building", 153292452),
                feature(
                    square(11.552, 48.1555),
                    "Physiotherapie Kinder und Erwachsene",
                    "building",
                    93216444,
                ),
                feature(square(11.5735, 48.1375), "Frauenkirche", "church", 30530908),
            ]
        ),
        "points": collection(
            [
                feature(square(11.5737, 48.1376, d=0.0002), "Frauenkirche", "attraction", 4140517),
            ]
        ),
    }


def portal_city() -> Dict[str, dict]:
    """The five-table portal fixture behind the dataset-listing answer."""
    return {
        "soil": collection(
            [
                feature(square(11.50, 48.12), LOAM_ROW, "loam", 9001),
                feature(square(11.51, 48.13), CLAY_ROW, "clay", 9002),
            ]
        ),
        "roads": collection(
            [
                feature(square(11.52, 48.14), "Theresienstraße", "residential", 3001),
                feature(square(11.53, 48.15), "Arcisstraße", "primary", 3002),
            ]
        ),
        "points": collection(
            [
                feature(square(11.54, 48.14), "Obst und Gemüse Auer", "greengrocer", 4001),
            ]
        ),
        "area": collection(
            [
                feature(square(11.55, 48.145), "Theresienwiese", "grass", 5001),
                feature(square(11.555, 48.15), "Nordfeld", "meadow", 5002),
            ]
        ),
        "buildings": collection(
            [
                feature(square(11.57, 48.146), "Krone-Villa", "building", 153292452),
                feature(square(11.573, 48.147), "Frauenkirche", "church", 7001),
            ]
        ),
    }


def fixture_places() -> Dict[str, dict]:
    """Offline geocoder entries covering every fixture walkthrough."""
    return {
        "Munich Maxvorstadt": {
            "box": MAXVORSTADT_BOX,
            "display_name": "Maxvorstadt, München",
        },
        "Maxvorstadt": {
            "box": MAXVORSTADT_BOX,
            "display_name": "Maxvorstadt, München",
        },
        "Munich Old Town": {
            "box": OLD_TOWN_BOX,
            "display_name": "Altstadt-Lehel, München",
        },
        "Munich": {
            "box": MUNICH_BOX,
            "display_name": "München, Bayern",
        },
    }


def build_store(tables: Dict[str, dict], embedder=None) -> KnowledgeStore:
    """Ingest a fixture table mapping into a fresh store."""
    store = KnowledgeStore(embedder)
    for name, document in tables.items():
        store.ingest_geojson(name, document)
    return store


def worked_store() -> KnowledgeStore:
    return build_store(worked_city())


def portal_store() -> KnowledgeStore:
    return build_store(portal_city(), recorded_embedder())


# --- synthetic city -----------------------------------------------------------

# Table -> (categories, name stems). Category words are deliberately
# disjoint across tables so exact-keyword queries are unambiguous.
SYNTHETIC_SCHEMA = {
    "land": (
        ["park", "forest", "meadow", "recreation ground", "orchard"],
        ["Luitpoldpark", "Westpark", "Hirschgarten", "Riemer Park", "Hofgarten"],
    ),
    "buildings": (
        ["residential", "commercial", "school", "kindergarten", "church"],
        ["Villa Stuck", "Hochhaus", "Backsteinhaus", "Gewerbehof", "Pfarrhaus"],
    ),
    "points": (
        ["bus stop", "restaurant", "pharmacy", "bakery", "fountain"],
        ["Marienplatz", "Stachus", "Quellhof", "Altstadtring", "Isartor"],
    ),
    "roads": (
        ["primary", "secondary", "tertiary", "footway", "cycleway"],
        ["Westendstraße", "Leopoldstraße", "Arnulfstraße", "Ringweg", "Kanalpfad"],
    ),
}

_SYNTH_SOUTH, _SYNTH_NORTH = 48.08, 48.20
_SYNTH_WEST, _SYNTH_EAST = 11.42, 11.70


def _synthetic_geometry(rng: random.Random, table: str) -> dict:
    lat = rng.uniform(_SYNTH_SOUTH, _SYNTH_NORTH - 0.01)
    lon = rng.uniform(_SYNTH_WEST, _SYNTH_EAST - 0.01)
    if table == "roads":
        steps = [[lon, lat]]
        for _ in range(rng.randint(2, 5)):
            lon += rng.uniform(-0.003, 0.003)
            lat += rng.uniform(-0.003, 0.003)
            steps.append([round(lon, 6), round(lat, 6)])
        return {"type": "LineString", "coordinates": steps}
    if table == "points":
        return {"type": "Point", "coordinates": [round(lon, 6), round(lat, 6)]}
    # Land parcels are large enough to contain nearby buildings now and then.
    size = rng.uniform(0.002, 0.006) if table == "land" else rng.uniform(0.0003, 0.0012)
    return square(round(lon, 6), round(lat, 6), d=round(size, 6))


def synthetic_city(seed: int, features: int = 2000) -> Dict[str, dict]:
    """Seeded synthetic town spread over the four schema tables.

    Roughly a quarter of the features land in each table; every third
    feature carries a name so named tiers have material. To guarantee
    realizable containment relations, each land parcel gets a one-in-four
    chance of a small building seeded inside it.
    """
    rng = random.Random(seed)
    tables: Dict[str, List[dict]] = {name: [] for name in SYNTHETIC_SCHEMA}
    table_names = list(SYNTHETIC_SCHEMA)
    counter = 0
    while sum(len(rows) for rows in tables.values()) < features:
        table = rng.choice(table_names)
        categories, stems = SYNTHETIC_SCHEMA[table]
        counter += 1
        category = rng.choice(categories)
        name = None
        if counter % 3 == 0:
            name = f"{rng.choice(stems)} {counter}"
        geometry = _synthetic_geometry(rng, table)
        tables[table].append(feature(geometry, name, category, counter))
        if table == "land" and rng.random() < 0.25:
            ring = geometry["coordinates"][0]
            lon, lat = ring[0]
            side = (ring[2][0] - ring[0][0]) / 4
            counter += 1
            inner = square(round(lon + side, 6), round(lat + side, 6), d=round(side, 6))
            building_category = rng.choice(SYNTHETIC_SCHEMA["buildings"][0])
            inner_name = None
            if counter % 3 == 0:
                inner_name = f"{rng.choice(SYNTHETIC_SCHEMA['buildings'][1])} {counter}"
            tables["buildings"].append(feature(inner, inner_name, building_category, counter))
    return {name: collection(rows) for name, rows in tables.items()}
