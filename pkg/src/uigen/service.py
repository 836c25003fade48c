"""HTTP facade over the engine: sessions, artifacts, annotations, reports.

Sessions run asynchronously; clients poll. Every number a client sees comes
from the event log, so any report fetched over HTTP equals the same
computation done as a library call on the same store. Artifact documents are
served verbatim under headers that confine them to a scripting-only sandbox
with no network and no top-level navigation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import InvalidConfigError
from .evalharness import (
    EmptySetError,
    IncompleteJudgmentError,
    aggregate_instances,
    compute_win_tie_loss,
    filter_judgments,
    judgment_from_dict,
    render_win_tie_loss,
)
from .pipeline import GenerationPipeline, UserQuery
from .provider import Provider
from .refinement import RefinementConfig, RewardEngine, run_refinement
from .store import DuplicateAnnotationError, SessionStore, UnknownArtifactError, UnknownSessionError

logger = logging.getLogger(__name__)

ARTIFACT_SANDBOX_HEADERS = {
    # scripting allowed, everything else shut: no network, no navigation, no embedding abuse
    "Content-Security-Policy": (
        "sandbox allow-scripts; default-src 'none'; script-src 'unsafe-inline'; "
        "style-src 'unsafe-inline'; img-src data: blob:; media-src data: blob:; "
        "font-src data:; connect-src 'none'; form-action 'none'; base-uri 'none'"
    ),
    "X-Content-Type-Options": "nosniff",
    "Referrer-Policy": "no-referrer",
    "Cache-Control": "no-store",
}


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _error(status: int, code: str, message: str, **extra: Any) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message, **extra})


def _session_identity(
    provider: Provider | None, store: SessionStore, query_text: str, config: RefinementConfig
) -> tuple[str, Callable[[], str]]:
    """Session id and clock; fully deterministic in replay mode."""
    if provider is not None and provider.mode == "replay" and provider.archive is not None:
        basis = json.dumps(
            {
                "query": query_text,
                "config": config.to_dict(),
                "archive": provider.archive.content_hash(),
                "existing": len(store.session_ids()),
            },
            sort_keys=True,
        )
        session_id = "s-" + hashlib.sha256(basis.encode("utf-8")).hexdigest()[:12]
        epoch = provider.archive.metadata.get("created_at", "1970-01-01T00:00:00+00:00")
        return session_id, lambda: epoch
    return "s-" + uuid.uuid4().hex[:12], _utc_now


def _first_tick(base_clock: Callable[[], str]) -> tuple[str, Callable[[], str]]:
    """Pin the first clock reading so the created event and session agree on it."""
    first = base_clock()
    state = {"used": False}

    def clock() -> str:
        if not state["used"]:
            state["used"] = True
            return first
        return base_clock()

    return first, clock


def create_app(
    store: SessionStore,
    provider: Provider | None,
    pipeline: GenerationPipeline | None = None,
    reward: RewardEngine | None = None,
    console_dir: str | Path | None = None,
    iteration_delay_s: float = 0.0,
    run_in_thread: bool = True,
) -> FastAPI:
    app = FastAPI(title="uigen", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.provider = provider
    engine_pipeline = pipeline or GenerationPipeline()
    engine_reward = reward or RewardEngine()

    def _run_session(session_id: str, query: UserQuery, config: RefinementConfig, clock) -> None:
        def observer(name: str, payload: dict) -> None:
            store.append_event(session_id, name, payload, clock())
            if name == "iteration_done" and iteration_delay_s > 0:
                time.sleep(iteration_delay_s)

        try:
            run_refinement(
                query,
                config,
                provider,
                engine_pipeline,
                engine_reward,
                session_id=session_id,
                clock=clock,
                observer=observer,
            )
        except Exception as exc:  # journal anything unexpected, never lose the session
            logger.exception("session %s crashed", session_id)
            store.append_event(
                session_id, "failed", {"error": f"{type(exc).__name__}: {exc}"}, clock()
            )

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        if provider is None:
            return _error(503, "provider-unavailable", "no provider configured (live mode only)")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "malformed-body", "request body must be a JSON object")
        query_text = str(body.get("query", "")).strip()
        if not query_text:
            return _error(400, "empty-query", "query must be non-empty")
        overrides = body.get("config", {})
        if not isinstance(overrides, dict):
            return _error(400, "config-out-of-bounds", "config must be an object")
        allowed = set(RefinementConfig().to_dict())
        unknown = set(overrides) - allowed
        if unknown:
            return _error(400, "config-out-of-bounds", f"unknown config fields: {sorted(unknown)}")
        try:
            config = RefinementConfig(**overrides)
        except (InvalidConfigError, TypeError) as exc:
            return _error(400, "config-out-of-bounds", str(exc))
        session_id, base_clock = _session_identity(provider, store, query_text, config)
        created_at, clock = _first_tick(base_clock)
        query = UserQuery(id=session_id, text=query_text)
        store.append_event(
            session_id,
            "created",
            {
                "query": {
                    "id": query.id,
                    "text": query.text,
                    "domain": query.domain,
                    "detail_level": query.detail_level,
                    "query_type": query.query_type,
                },
                "config": config.to_dict(),
                "created_at": created_at,
            },
            created_at,
        )
        if run_in_thread:
            threading.Thread(
                target=_run_session, args=(session_id, query, config, clock), daemon=True
            ).start()
        else:
            _run_session(session_id, query, config, clock)
        return {"id": session_id, "status": "running"}

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [store.snapshot(sid).summary() for sid in store.session_ids()]}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return store.snapshot(session_id).summary()
        except UnknownSessionError:
            return _error(404, "not-found", f"unknown session {session_id!r}")

    @app.get("/sessions/{session_id}/iterations")
    def list_iterations(session_id: str):
        try:
            return {"iterations": store.snapshot(session_id).iterations}
        except UnknownSessionError:
            return _error(404, "not-found", f"unknown session {session_id!r}")

    @app.get("/sessions/{session_id}/trace")
    def get_trace(session_id: str):
        try:
            return store.snapshot(session_id).to_dict()
        except UnknownSessionError:
            return _error(404, "not-found", f"unknown session {session_id!r}")

    @app.get("/artifacts/{artifact_id}/html")
    def get_artifact(artifact_id: str):
        try:
            record = store.artifact(artifact_id)
        except UnknownArtifactError:
            return _error(404, "not-found", f"unknown artifact {artifact_id!r}")
        return HTMLResponse(content=record["document"], headers=ARTIFACT_SANDBOX_HEADERS)

    @app.post("/annotations", status_code=201)
    async def submit_annotation(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "malformed-body", "request body must be a JSON object")
        try:
            judgment = judgment_from_dict(body)
        except IncompleteJudgmentError as exc:
            return _error(422, "incomplete-dimensions", str(exc), missing=exc.missing)
        except (KeyError, ValueError) as exc:
            return _error(422, "invalid-judgment", f"unusable judgment: {exc}")
        try:
            accepted = store.append_annotation(judgment, _utc_now())
        except DuplicateAnnotationError as exc:
            return _error(409, "duplicate-annotation", str(exc))
        return {"id": accepted}

    @app.get("/reports/winloss")
    def winloss_report(pair: str = ""):
        labels = tuple(part.strip() for part in pair.split(",") if part.strip())
        if len(labels) != 2:
            return _error(400, "bad-pair", "pair must be two comma-separated variant labels")
        judgments = store.read_annotations()
        report = filter_judgments(judgments, store.trap_keys())
        aggregates = aggregate_instances(report.kept)
        try:
            table = compute_win_tie_loss(aggregates, (labels[0], labels[1]))
        except EmptySetError:
            return _error(404, "no-instances", f"no aggregated instances for pair {labels}")
        return {
            "table": table.to_dict(),
            "text": render_win_tie_loss(table),
            "filtering": {
                "kept": len(report.kept),
                "discarded": [
                    {"annotator_id": d.annotator_id, "reason": d.reason, "detail": d.detail}
                    for d in report.discarded
                ],
                "flags": [
                    {
                        "annotator_id": f.annotator_id,
                        "instance_id": f.instance_id,
                        "reason": f.reason,
                        "detail": f.detail,
                    }
                    for f in report.flags
                ],
            },
        }

    if console_dir is not None and Path(console_dir).exists():
        app.mount("/console", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app
