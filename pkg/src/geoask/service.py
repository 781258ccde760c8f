"""HTTP layer: wire serialization, the FastAPI app, and engine assembly."""

from __future__ import annotations

import json
from typing import List, Optional

from fastapi import FastAPI, File, Form, HTTPException, Request, UploadFile

from .config import MODE_LIVE, Settings
from .engine import Answer, Engine
from .errors import (
    BackendUnavailable,
    KeyParseError,
    NotFeatureCollection,
    RateLimited,
    TranscriptMiss,
    describe,
)
from .eval.fixtures import (
    fixture_places,
    portal_store,
    recorded_embedder,
    worked_store,
)
from .eval.scripting import demo_transcript
from .keys import GeoSet
from .llm import LiveGateway, LLMGateway, ScriptedGateway, Transcript
from .region import FixtureGeocoder, LiveGeocoder
from .store import KnowledgeStore


def layers_from_geoset(geoset: Optional[GeoSet]) -> List[dict]:
    """Group features by source layer, first appearance first.

    The layer name is ``database/type``; each feature carries its encoded
    key, WKT geometry, and the display name shown on hover.
    """
    grouped: dict = {}
    if geoset is not None:
        for key, geometry in geoset.items():
            layer = f"{key.database}/{key.type_name}"
            grouped.setdefault(layer, []).append(
                {
                    "key": key.encode(),
                    "wkt": geometry.wkt(),
                    "display_name": key.name,
                }
            )
    return [
        {"layer_name": name, "features": features}
        for name, features in grouped.items()
    ]


def answer_body(answer: Answer) -> dict:
    return {
        "kind": answer.kind,
        "message": answer.message,
        "steps": [
            {"index": s.index, "description": s.description, "step_id": s.step_id}
            for s in answer.steps
        ],
        "layers": layers_from_geoset(answer.display),
        "chart": answer.chart.to_jsonable() if answer.chart is not None else None,
        "usage": answer.usage.as_dict(),
    }


def ingest_report_body(report, digest: str) -> dict:
    return {
        "dataset": report.dataset,
        "tables": report.tables,
        "features": report.features,
        "stored": report.stored(),
        "embedded_values": report.embedded_values,
        "skipped": [{"index": i, "reason": r} for i, r in report.skipped],
        "digest": digest,
    }


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="geoask")

    @app.post("/api/query")
    async def query(request: Request):
        try:
            payload = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body must be valid JSON")
        if not isinstance(payload, dict):
            raise HTTPException(status_code=400, detail="body must be a JSON object")
        prompt = payload.get("prompt")
        if not isinstance(prompt, str) or not prompt.strip():
            raise HTTPException(
                status_code=400, detail="prompt must be a non-empty string"
            )
        session_id = payload.get("session_id", "default")
        if not isinstance(session_id, str) or not session_id:
            raise HTTPException(status_code=400, detail="session_id must be a string")
        try:
            answer = engine.ask(session_id, prompt)
        except (BackendUnavailable, RateLimited, TranscriptMiss) as exc:
            raise HTTPException(status_code=502, detail=describe(exc))
        return answer_body(answer)

    @app.get("/api/steps/{step_id}")
    async def step(step_id: str):
        found = engine.find_step(step_id)
        if found is None:
            raise HTTPException(status_code=404, detail=f"unknown step: {step_id}")
        description, snapshot = found
        return {
            "step_id": step_id,
            "description": description,
            "layers": layers_from_geoset(snapshot),
        }

    @app.post("/api/data")
    async def upload(name: str = Form(...), file: UploadFile = File(...)):
        blob = await file.read()
        try:
            document = json.loads(blob)
        except json.JSONDecodeError as exc:
            raise HTTPException(status_code=422, detail=f"not valid JSON: {exc}")
        try:
            report = engine.store.ingest_geojson(name, document)
        except (NotFeatureCollection, KeyParseError) as exc:
            raise HTTPException(status_code=422, detail=describe(exc))
        return ingest_report_body(report, engine.store.digest())

    return app


def mount_ui(app: FastAPI, directory: str) -> None:
    """Serve the built web portal at the root path, API routes untouched.

    The directory must contain an ``index.html``; this is the ``dist``
    output of the frontend build plus its static page.
    """
    from pathlib import Path

    from starlette.staticfiles import StaticFiles

    root = Path(directory)
    if not (root / "index.html").is_file():
        raise FileNotFoundError(f"no index.html under {directory}")
    app.mount("/", StaticFiles(directory=str(root), html=True), name="ui")


# --- assembly from settings ---------------------------------------------------


def build_store(settings: Settings) -> KnowledgeStore:
    embedder = recorded_embedder() if settings.embedding == "recorded" else None
    if settings.data_dir:
        return KnowledgeStore.load(settings.data_dir, embedder)
    if settings.fixture == "portal":
        return portal_store()
    return worked_store()


def build_gateway(settings: Settings) -> LLMGateway:
    if settings.mode == MODE_LIVE:
        return LiveGateway(
            settings.llm_base_url,
            api_key=settings.llm_api_key,
            model=settings.llm_model,
            timeout=settings.llm_timeout,
        )
    if settings.transcript_path:
        return ScriptedGateway(Transcript.load(settings.transcript_path))
    return ScriptedGateway(demo_transcript())


def build_geocoder(settings: Settings):
    if settings.geocoder.startswith(("http://", "https://")):
        return LiveGeocoder(settings.geocoder)
    if settings.geocoder == "fixtures":
        return FixtureGeocoder(fixture_places())
    return FixtureGeocoder.load(settings.geocoder)


def build_engine(settings: Settings) -> Engine:
    return Engine(build_gateway(settings), build_store(settings), build_geocoder(settings))


def app_from_settings(settings: Settings) -> FastAPI:
    return create_app(build_engine(settings))
