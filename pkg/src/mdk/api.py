"""HTTP face of the engine.

Thin by design: every endpoint parses the request, calls the same functions
the CLI uses, and returns their JSON. Sessions live as files on disk, one
per session id, written atomically; a GET returns the stored document bytes
unchanged, so the wire format and the on-disk format are the same canonical
serialization. Engine errors map 1:1 onto HTTP responses carrying the
machine-readable error code.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse

from . import exporter, interview, search as search_mod
from .errors import (
    AuthFailed,
    BindError,
    ClassMismatch,
    MdkError,
    PartialExport,
    UnknownSession,
)
from .registry import EntityRef
from .schema import CatalogSchema, default_schema, load_schema
from .search import SearchSpec
from .sources import SourceHub
from .tripledesk import TripleStore
from .validation import validate_session


class SessionStore:
    """One JSON file per session, atomic replace on write, per-session lock."""

    def __init__(self, directory: str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def path(self, session_id: str) -> Path:
        safe = "".join(c for c in session_id if c.isalnum() or c in "-_")
        if not safe or safe != session_id:
            raise UnknownSession(f"no session {session_id!r}")
        return self.directory / f"{safe}.json"

    def read_bytes(self, session_id: str) -> bytes:
        p = self.path(session_id)
        if not p.exists():
            raise UnknownSession(f"no session {session_id!r}")
        return p.read_bytes()

    def load(self, session_id: str, schema: CatalogSchema):
        return interview.deserialize_session(self.read_bytes(session_id).decode("utf-8"), schema)

    def save(self, session):
        text = interview.serialize_session(session)
        p = self.path(session.session_id)
        fd, tmp = tempfile.mkstemp(dir=str(self.directory), suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, p)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)


class AppState:
    def __init__(self, schema: CatalogSchema, hub: SourceHub, store: SessionStore):
        self.schema = schema
        self.hub = hub
        self.store = store
        self.embedded_stores: dict[str, TripleStore] = {}
        self.wikibase_sinks: dict[str, exporter.FixtureWikibaseSink] = {}
        self._sink_lock = threading.Lock()

    def sparql_sink(self, source_id: str) -> exporter.EmbeddedStoreSink:
        with self._sink_lock:
            store = self.embedded_stores.setdefault(source_id, TripleStore())
        return exporter.EmbeddedStoreSink(store, source_id)

    def wikibase_sink(self, source_id: str) -> exporter.FixtureWikibaseSink:
        with self._sink_lock:
            sink = self.wikibase_sinks.get(source_id)
            if sink is None:
                expected = os.environ.get("MDK_OAUTH_TOKEN") or "fixture-token"
                sink = exporter.FixtureWikibaseSink(source_id, expected_token=expected)
                self.wikibase_sinks[source_id] = sink
        return sink


def _load_configured_schema() -> CatalogSchema:
    path = os.environ.get("MDK_SCHEMA", "")
    if path:
        return load_schema(Path(path).read_text(encoding="utf-8"))
    return default_schema()


def _sessions_dir() -> str:
    configured = os.environ.get("MDK_SESSIONS_DIR", "")
    if configured:
        return configured
    return os.path.join(tempfile.gettempdir(), "mdk-sessions")


def create_app(schema: CatalogSchema | None = None, hub: SourceHub | None = None, sessions_dir: str | None = None) -> FastAPI:
    schema = schema or _load_configured_schema()
    hub = hub or SourceHub(schema)
    store = SessionStore(sessions_dir or _sessions_dir())
    state = AppState(schema, hub, store)

    app = FastAPI(title="mdk", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.mdk = state

    @app.exception_handler(MdkError)
    async def on_engine_error(request: Request, exc: MdkError):
        body = {"error": {"code": exc.code, "message": exc.message}}
        if exc.detail is not None:
            body["error"]["detail"] = exc.detail
        if isinstance(exc, PartialExport):
            body["error"]["receipt"] = exc.receipt
            body["error"]["resume"] = exc.resume
        return JSONResponse(status_code=exc.http_status, content=body)

    @app.exception_handler(ValueError)
    async def on_value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": {"code": "bad-request", "message": str(exc)}})

    # -- meta ----------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "schemaVersion": state.schema.schema_version, "sources": state.hub.availability()}

    @app.get("/catalogs")
    def catalogs():
        out = []
        for catalog in state.schema.catalogs:
            out.append(
                {
                    "id": catalog.id,
                    "pages": [
                        {"id": p.id, "title": p.title, "class": p.class_name} for p in catalog.pages
                    ],
                }
            )
        return {"catalogs": out, "schemaVersion": state.schema.schema_version}

    # -- sessions ------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict):
        catalog_id = payload.get("catalog", "")
        session = interview.start_session(catalog_id, state.schema, session_id=payload.get("sessionId") or None)
        with state.store.lock(session.session_id):
            state.store.save(session)
        catalog = state.schema.catalog(catalog_id)
        return {
            "sessionId": session.session_id,
            "catalog": catalog_id,
            "schemaVersion": state.schema.schema_version,
            "pages": [{"id": p.id, "title": p.title, "class": p.class_name} for p in catalog.pages],
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return Response(content=state.store.read_bytes(session_id), media_type="application/json")

    def _mutate(session_id: str, fn):
        with state.store.lock(session_id):
            session = state.store.load(session_id, state.schema)
            result = fn(session)
            state.store.save(session)
            return result

    @app.post("/sessions/{session_id}/select")
    def select(session_id: str, payload: dict):
        page_id = payload.get("page", "")

        def run(session):
            if payload.get("ref"):
                choice = EntityRef.from_json(payload["ref"])
            elif payload.get("label"):
                choice = str(payload["label"])
            else:
                raise ClassMismatch("select needs a ref or a label")
            return interview.answer_select(session, page_id, choice, state.hub)

        return _mutate(session_id, run)

    @app.post("/sessions/{session_id}/fields")
    def set_field(session_id: str, payload: dict):
        return _mutate(
            session_id,
            lambda s: interview.set_field(s, payload.get("key", ""), payload.get("field", ""), payload.get("value")),
        )

    @app.post("/sessions/{session_id}/relations")
    def link(session_id: str, payload: dict):
        return _mutate(
            session_id,
            lambda s: interview.link_items(
                s, payload.get("fromKey", ""), payload.get("relation", ""), payload.get("toKey", "")
            ),
        )

    @app.post("/sessions/{session_id}/intra-relations")
    def intra(session_id: str, payload: dict):
        return _mutate(
            session_id,
            lambda s: interview.set_intra_relation(
                s, payload.get("fromKey", ""), payload.get("relation", ""), payload.get("toKey", "")
            ),
        )

    @app.post("/sessions/{session_id}/publications")
    def publications(session_id: str, payload: dict):
        if payload.get("ref"):
            subject = EntityRef.from_json(payload["ref"])
        else:
            subject = payload.get("doi") or payload.get("url") or ""

        def run(session):
            record = interview.add_publication(session, subject, payload.get("linkedItemKeys", []), state.hub)
            return record.to_json()

        return _mutate(session_id, run)

    @app.post("/sessions/{session_id}/search-spec")
    def search_spec(session_id: str, payload: dict):
        return _mutate(session_id, lambda s: interview.set_search_spec(s, payload))

    @app.get("/sessions/{session_id}/validation")
    def validation(session_id: str):
        session = state.store.load(session_id, state.schema)
        return validate_session(session, state.schema).to_json()

    @app.get("/sessions/{session_id}/preview")
    def preview(session_id: str):
        return _mutate(session_id, lambda s: exporter.build_preview(s, state.schema))

    @app.post("/sessions/{session_id}/export")
    def export(session_id: str, payload: dict):
        sink = payload.get("sink") or {}
        dry_run = bool(payload.get("dryRun", False))

        def run(session):
            plan = exporter.plan_export(session, sink, state.schema)
            summary = {
                "createOps": sum(1 for op in plan.ops if op.kind == "create-entity"),
                "statementOps": sum(1 for op in plan.ops if op.kind == "add-statement"),
            }
            if dry_run:
                body = {"dryRun": True, "plan": plan.to_json(), "summary": summary}
                if plan.sink["type"] == exporter.SINK_SPARQL:
                    body["queries"] = exporter.render_insert_queries(plan)
                return body
            if plan.sink["type"] == exporter.SINK_SPARQL:
                client = state.sparql_sink(plan.sink["source"])
                credentials = None
            else:
                client = state.wikibase_sink(plan.sink["source"])
                credentials = payload.get("token") or os.environ.get("MDK_OAUTH_TOKEN", "")
            receipt = exporter.execute_export(plan, credentials, client)
            interview.record_export(session, plan.sink, receipt)
            written = exporter.writeback_pids(session, receipt, state.schema)
            return {"dryRun": False, "receipt": receipt, "summary": summary, "pidsWrittenBack": written}

        return _mutate(session_id, run)

    # -- lookups -------------------------------------------------------------

    @app.get("/autocomplete")
    def autocomplete(
        q: str = Query(default=""),
        class_name: str = Query(default="", alias="class"),
        catalog: str = Query(default=""),
        limit: int = Query(default=10),
    ):
        if catalog:
            if class_name not in state.schema.catalog(catalog).page_classes():
                raise ClassMismatch(f"catalog {catalog!r} has no page for class {class_name!r}")
        groups = state.hub.autocomplete(q, class_name, limit=limit)
        return {
            "groups": [
                {"source": g["source"], "status": g["status"], "refs": [r.to_json() for r in g["refs"]]}
                for g in groups
            ]
        }

    @app.post("/search")
    def run_search(payload: dict):
        spec = SearchSpec.from_json(payload)
        results = search_mod.execute_search(spec, state.hub, state.schema)
        doc = results.to_json()
        doc["summary"] = search_mod.summarize_results(results)
        return doc

    return app


def serve(bind: str = "", schema: CatalogSchema | None = None, static_dir: str | None = None):
    """Run the service under uvicorn; `bind` is host:port."""
    import uvicorn

    bind = bind or os.environ.get("MDK_BIND", "127.0.0.1:8080")
    host, _, port_text = bind.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_text or "8080")
    except ValueError:
        raise BindError(f"cannot bind {bind!r}: port is not a number") from None
    app = create_app(schema=schema)
    static = static_dir or os.environ.get("MDK_STATIC_DIR", "")
    if static and Path(static).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=static, html=True), name="ui")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        raise BindError(f"cannot bind {bind!r}: {exc}") from exc
    return app
