"""Command-line entry points: serve, ingest, ask, and eval."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import Settings, load_settings
from .errors import BadConfig, GeoAskError, describe
from .store import KnowledgeStore


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoask",
        description="Natural-language question answering over geographic data.",
    )
    parser.add_argument("--config", default=None, help="path to a JSON settings file")
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="run the HTTP API")
    serve_p.add_argument("--host", default=None, help="override the configured host")
    serve_p.add_argument(
        "--port", type=int, default=None, help="override the configured port"
    )
    serve_p.add_argument(
        "--ui",
        default=None,
        metavar="DIR",
        help="also serve the web portal from this directory",
    )

    ingest_p = sub.add_parser("ingest", help="load a GeoJSON file into the store")
    ingest_p.add_argument("name", help="dataset name")
    ingest_p.add_argument("file", help="GeoJSON FeatureCollection file")

    ask_p = sub.add_parser("ask", help="run one prompt and print the response JSON")
    ask_p.add_argument("prompt")
    ask_p.add_argument("--session", default="cli", help="session id (default: cli)")

    eval_p = sub.add_parser("eval", help="run the evaluation harness")
    eval_p.add_argument("config_file", help="harness configuration JSON")
    eval_p.add_argument(
        "--out", default=None, help="also write the JSON report to this path"
    )
    return parser


def cmd_serve(settings: Settings, args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app_from_settings, mount_ui

    app = app_from_settings(settings)
    if args.ui is not None:
        try:
            mount_ui(app, args.ui)
        except FileNotFoundError as exc:
            print(f"serve failed: {exc}", file=sys.stderr)
            return 1
    host = args.host if args.host is not None else settings.host
    port = args.port if args.port is not None else settings.port
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return code or 1
    except OSError as exc:
        print(f"serve failed: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_ingest(settings: Settings, args: argparse.Namespace) -> int:
    from .eval.fixtures import recorded_embedder
    from .service import ingest_report_body

    document = json.loads(Path(args.file).read_text(encoding="utf-8"))
    embedder = recorded_embedder() if settings.embedding == "recorded" else None
    data_dir = Path(settings.data_dir) if settings.data_dir else None
    if data_dir is not None and (data_dir / "tables.json").exists():
        store = KnowledgeStore.load(data_dir, embedder)
    else:
        store = KnowledgeStore(embedder)
    report = store.ingest_geojson(args.name, document)
    if data_dir is not None:
        data_dir.mkdir(parents=True, exist_ok=True)
        store.save(data_dir)
    print(json.dumps(ingest_report_body(report, store.digest()), indent=2))
    return 0


def cmd_ask(settings: Settings, args: argparse.Namespace) -> int:
    from .service import answer_body, build_engine

    engine = build_engine(settings)
    answer = engine.ask(args.session, args.prompt)
    print(json.dumps(answer_body(answer), indent=2, ensure_ascii=False))
    return 0


def cmd_eval(settings: Settings, args: argparse.Namespace) -> int:
    from .eval.harness import run_config

    report = run_config(args.config_file)
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_jsonable(), indent=2), encoding="utf-8"
        )
    print(report.text_summary())
    return 0


COMMANDS = {
    "serve": cmd_serve,
    "ingest": cmd_ingest,
    "ask": cmd_ask,
    "eval": cmd_eval,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.config)
        return COMMANDS[args.command](settings, args)
    except BadConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"invalid JSON: {exc}", file=sys.stderr)
        return 1
    except GeoAskError as exc:
        print(describe(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
