"""Turning a finished session into knowledge-graph edits.

The pipeline is preview -> plan -> execute -> write back. A plan is a flat
list of operations (entity creations first, then statements) that only ever
references a new entity through a placeholder token, so the same plan can be
rendered as INSERT DATA text, dry-run inspected, or executed op by op
against a sink with resumable failure handling. Once the sink has assigned
persistent identifiers, they are written back onto the session's items so a
later session can link against them.

Sinks come in two shapes: SPARQL-insert sinks take triples (new entities get
deterministically minted URIs), wikibase sinks take entity/statement calls
and assign their own ids. Wikibase sinks require a bearer token; the
credential helpers at the bottom cover a static token, the environment, and
a device-code grant.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from .errors import (
    AuthFailed,
    EmptySession,
    ExportInProgress,
    MissingPredicateMapping,
    PartialExport,
    ReceiptMismatch,
    SinkError,
    SinkMismatch,
    ValidationGate,
)
from .interview import QuestionnaireSession, cache_citations, record_export, writeback_pids_event
from .registry import ENTITY_URI_BASES, EntityRef, entity_uri
from .schema import CatalogSchema
from .search import SearchSpec, build_search
from .tripledesk import InsertData, Literal, Triple, TripleStore, Uri, serialize_query
from .validation import PUBLICATION_CLASS, validate_session
from .vocab import RDF_TYPE, RDFS_LABEL, SCHEMA_DESCRIPTION, relation_uri

SINK_SPARQL = "sparql-insert"
SINK_WIKIBASE = "wikibase"
SINK_TYPES = (SINK_SPARQL, SINK_WIKIBASE)

PLACEHOLDER_PREFIX = "new-"


# ---------------------------------------------------------------------------
# Preview


def build_preview(session: QuestionnaireSession, schema: CatalogSchema | None = None) -> dict:
    """Render the session for human review prior to export.

    Documentation sessions become a section-per-page document mirroring the
    questionnaire flow; search sessions yield the exact query text that
    execution would send. Citation strings are resolved here and cached on
    the session so the export stage reuses them."""
    schema = schema or session.schema
    if session.catalog_id == "search":
        if not session.search_spec:
            raise EmptySession("no search spec to preview")
        return {
            "kind": "search",
            "sessionId": session.session_id,
            "catalog": session.catalog_id,
            "queryText": build_search(SearchSpec.from_json(session.search_spec), schema),
        }
    if not session.registry.items and not session.publications:
        raise EmptySession("session documents nothing")

    sections = []
    for page in schema.catalog(session.catalog_id).pages:
        selected = session.page_states.get(page.id, {}).get("selected", [])
        entries = []
        for key in selected:
            item = session.registry.get(key)
            class_def = schema.class_def(item.class_name)
            fields = [
                {"name": f.name, "value": item.fields[f.name], "provenance": item.provenance.get(f.name, "")}
                for f in class_def.info_box_fields
                if f.name in item.fields
            ]
            relations = []
            for rel_name, targets in item.relations.items():
                relations.append(
                    {
                        "relation": rel_name,
                        "targets": [
                            {"key": t, "label": session.registry.get(t).label if t in session.registry else t}
                            for t in targets
                        ],
                    }
                )
            entries.append(
                {
                    "key": key,
                    "class": item.class_name,
                    "label": item.label,
                    "refs": [r.to_json() for r in item.refs],
                    "fields": fields,
                    "relations": relations,
                }
            )
        sections.append({"page": page.id, "title": page.title, "items": entries})

    citations = {}
    publications = []
    for entry in session.publications:
        record = entry["record"]
        citation = record.citation()
        citations[record.doi or record.url or record.title] = citation
        publications.append(
            {
                "citation": citation,
                "linkedItems": [
                    {"key": k, "label": session.registry.get(k).label if k in session.registry else k}
                    for k in entry["linkedItemKeys"]
                ],
            }
        )
    cache_citations(session, citations)

    return {
        "kind": "documentation",
        "sessionId": session.session_id,
        "catalog": session.catalog_id,
        "sections": sections,
        "publications": publications,
    }


# ---------------------------------------------------------------------------
# Planning


@dataclass
class ExportOp:
    kind: str  # create-entity | add-statement
    subject: str  # placeholder token or existing identifier
    payload: dict = field(default_factory=dict)

    def to_json(self):
        return {"kind": self.kind, "subject": self.subject, "payload": dict(self.payload)}

    @classmethod
    def from_json(cls, doc) -> "ExportOp":
        return cls(kind=doc["kind"], subject=doc["subject"], payload=dict(doc.get("payload", {})))


@dataclass
class ExportPlan:
    session_id: str
    sink: dict  # {"type": ..., "source": ...}
    ops: list = field(default_factory=list)
    placeholders: dict = field(default_factory=dict)  # itemKey -> token

    def to_json(self):
        return {
            "sessionId": self.session_id,
            "sink": dict(self.sink),
            "ops": [op.to_json() for op in self.ops],
            "placeholders": dict(self.placeholders),
        }

    @classmethod
    def from_json(cls, doc) -> "ExportPlan":
        return cls(
            session_id=doc["sessionId"],
            sink=dict(doc["sink"]),
            ops=[ExportOp.from_json(o) for o in doc.get("ops", [])],
            placeholders=dict(doc.get("placeholders", {})),
        )


def _check_sink(sink: dict) -> dict:
    sink_type = sink.get("type")
    if sink_type not in SINK_TYPES:
        raise SinkMismatch(f"unknown sink type {sink_type!r}; one of {', '.join(SINK_TYPES)}")
    if not sink.get("source"):
        raise SinkMismatch("sink needs a source id")
    return {"type": sink_type, "source": sink["source"]}


def plan_export(session: QuestionnaireSession, sink: dict, schema: CatalogSchema | None = None) -> ExportPlan:
    """Compile the session into sink operations.

    Items already carrying an identifier in the sink's source are reused,
    never recreated. For SPARQL sinks, items known to any source keep their
    existing URI (cross-dataset links are fine in a triple store); only
    user-authored items get created. A wikibase sink can only make
    statements about its own entities, so everything without a sink-local id
    is created there. Publication records travel as citation text on the
    preview, not as operations."""
    schema = schema or session.schema
    sink = _check_sink(sink)
    report = validate_session(session, schema)
    if not report.passed:
        failures = "; ".join(f"{v.kind}({v.item_key})" for v in report.errors())
        raise ValidationGate(f"session fails validation: {failures}", detail=report.to_json())
    plan = ExportPlan(session_id=session.session_id, sink=sink)
    sparql_sink = sink["type"] == SINK_SPARQL
    source_id = sink["source"]

    subjects: dict[str, str] = {}
    for key in session.registry.items:
        item = session.registry.get(key)
        if item.class_name == PUBLICATION_CLASS:
            continue
        local = None
        for ref in item.refs:
            if ref.source == source_id and ref.local_id:
                local = ref if sparql_sink else ref.local_id
                break
        if local is not None:
            subjects[key] = local.uri if sparql_sink else local
            continue
        if sparql_sink and item.is_external():
            subjects[key] = item.top_ref.uri
            continue
        token = PLACEHOLDER_PREFIX + key
        subjects[key] = token
        plan.placeholders[key] = token

    for key, token in plan.placeholders.items():
        item = session.registry.get(key)
        class_def = schema.class_def(item.class_name)
        if sparql_sink:
            instance_of = class_def.uri
        else:
            instance_of = class_def.wikibase_id(source_id)
            if not instance_of:
                raise MissingPredicateMapping(
                    f"schema maps no {source_id} class id for {item.class_name}"
                )
        plan.ops.append(
            ExportOp(
                kind="create-entity",
                subject=token,
                payload={
                    "itemKey": key,
                    "class": item.class_name,
                    "instanceOf": instance_of,
                    "label": str(item.fields.get("name", "") or item.label),
                    "description": str(item.fields.get("description", "") or ""),
                },
            )
        )

    for key in session.registry.items:
        item = session.registry.get(key)
        if key not in subjects:
            continue
        for rel_name, targets in item.relations.items():
            rel = schema.relation_for(rel_name, item.class_name)
            if rel is None or rel.range_class == PUBLICATION_CLASS:
                continue
            if sparql_sink:
                predicate = relation_uri(schema, rel.name)
            else:
                predicate = rel.wikibase_id(source_id)
                if not predicate:
                    raise MissingPredicateMapping(
                        f"schema maps no {source_id} property for relation {rel.name} ({rel.domain_class})"
                    )
            for target_key in targets:
                if target_key not in subjects:
                    continue
                plan.ops.append(
                    ExportOp(
                        kind="add-statement",
                        subject=subjects[key],
                        payload={
                            "predicate": predicate,
                            "object": subjects[target_key],
                            "relation": rel.name,
                            "fromKey": key,
                            "toKey": target_key,
                        },
                    )
                )
    return plan


# ---------------------------------------------------------------------------
# Rendering (SPARQL sinks)


def mint_uri(sink_source: str, session_id: str, token: str) -> str:
    """Deterministic URI for a new entity: same session and item always mint
    the same identifier, so re-rendering or resuming never forks."""
    base = ENTITY_URI_BASES.get(sink_source, f"urn:mdk:{sink_source}:")
    digest = uuid.uuid5(uuid.NAMESPACE_URL, f"mdk/{sink_source}/{session_id}/{token}")
    return f"{base}n{digest.hex}"


def _resolve_identifier(value: str, minted: dict) -> str:
    if value.startswith(PLACEHOLDER_PREFIX):
        return minted[value]
    return value


def _create_triples(op: ExportOp, subject_uri: str) -> list:
    subject = Uri(subject_uri)
    return [
        Triple(subject, Uri(RDF_TYPE), Uri(op.payload["instanceOf"])),
        Triple(subject, Uri(RDFS_LABEL), Literal(op.payload.get("label", ""))),
        Triple(subject, Uri(SCHEMA_DESCRIPTION), Literal(op.payload.get("description", ""))),
    ]


def render_insert_queries(plan: ExportPlan, granularity: str = "plan") -> list:
    """Render a SPARQL-sink plan as INSERT DATA text, minting URIs for every
    placeholder. `granularity` is "plan" (one block) or "op" (one block per
    operation). The output parses back through the embedded store's own
    parser, and rendering twice gives identical text."""
    if plan.sink.get("type") != SINK_SPARQL:
        raise SinkMismatch(f"cannot render {plan.sink.get('type')!r} plan as INSERT queries")
    if granularity not in ("plan", "op"):
        raise SinkMismatch(f"unknown rendering granularity {granularity!r}")
    minted = {token: mint_uri(plan.sink["source"], plan.session_id, token) for token in plan.placeholders.values()}
    groups: list[list] = []
    for op in plan.ops:
        if op.kind == "create-entity":
            triples = _create_triples(op, minted[op.subject])
        else:
            triples = [
                Triple(
                    Uri(_resolve_identifier(op.subject, minted)),
                    Uri(op.payload["predicate"]),
                    Uri(_resolve_identifier(op.payload["object"], minted)),
                )
            ]
        groups.append(triples)
    if not groups:
        return []
    if granularity == "plan":
        groups = [[t for g in groups for t in g]]
    return [serialize_query(InsertData(triples=tuple(g))) for g in groups]


# ---------------------------------------------------------------------------
# Sinks


class EmbeddedStoreSink:
    """Writes into an in-process triple store. No credentials involved."""

    requires_auth = False

    def __init__(self, store: TripleStore, source_id: str):
        self.store = store
        self.source_id = source_id

    def begin(self, token):
        return None

    def insert_triples(self, triples):
        for t in triples:
            self.store.add(t)


class FixtureWikibaseSink:
    """Wikibase stand-in backed by a dict; assigns sequential Q ids the way
    the real service does and enforces the bearer-token contract."""

    requires_auth = True

    def __init__(self, source_id: str, expected_token: str = "fixture-token", first_id: int = 6032641):
        self.source_id = source_id
        self.expected_token = expected_token
        self._next = first_id
        self.entities: dict[str, dict] = {}

    def begin(self, token):
        if token != self.expected_token:
            raise AuthFailed(f"sink {self.source_id} rejected the supplied token")

    def create_entity(self, label: str, description: str, instance_of: str) -> str:
        qid = f"Q{self._next}"
        self._next += 1
        self.entities[qid] = {
            "id": qid,
            "label": label,
            "description": description,
            "instanceOf": instance_of,
            "claims": {},
        }
        return qid

    def add_statement(self, subject: str, predicate: str, obj: str):
        if subject not in self.entities:
            raise SinkError(f"sink {self.source_id} has no entity {subject}", sink_message="unknown subject")
        claims = self.entities[subject]["claims"]
        values = claims.setdefault(predicate, [])
        if obj not in values:
            values.append(obj)


class WikibaseHttpSink:
    """Minimal REST client for a live wikibase; one call per operation."""

    requires_auth = True

    def __init__(self, source_id: str, base_url: str, timeout_s: float = 10.0, http=None):
        import requests as _requests

        self.source_id = source_id
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.http = http or _requests
        self._token = None

    def begin(self, token):
        if not token:
            raise AuthFailed(f"sink {self.source_id} requires a bearer token")
        self._token = token

    def _headers(self):
        return {"Authorization": f"Bearer {self._token}", "Content-Type": "application/json"}

    def create_entity(self, label: str, description: str, instance_of: str) -> str:
        body = {
            "item": {
                "labels": {"en": label},
                "descriptions": {"en": description},
                "statements": {"instanceOf": [instance_of]},
            }
        }
        resp = self.http.post(f"{self.base_url}/entities/items", json=body, headers=self._headers(), timeout=self.timeout_s)
        if resp.status_code == 401:
            raise AuthFailed(f"sink {self.source_id} rejected the supplied token")
        if resp.status_code >= 300:
            raise SinkError(f"sink {self.source_id} returned {resp.status_code}", sink_message=resp.text[:500])
        return resp.json()["id"]

    def add_statement(self, subject: str, predicate: str, obj: str):
        body = {"statement": {"property": {"id": predicate}, "value": {"type": "value", "content": obj}}}
        resp = self.http.post(
            f"{self.base_url}/entities/items/{subject}/statements",
            json=body,
            headers=self._headers(),
            timeout=self.timeout_s,
        )
        if resp.status_code == 401:
            raise AuthFailed(f"sink {self.source_id} rejected the supplied token")
        if resp.status_code >= 300:
            raise SinkError(f"sink {self.source_id} returned {resp.status_code}", sink_message=resp.text[:500])


# ---------------------------------------------------------------------------
# Execution


_ACTIVE_EXPORTS: set = set()
_ACTIVE_LOCK = threading.Lock()


def _landing_link(sink: dict, pid: str) -> str:
    if sink["type"] == SINK_SPARQL:
        return pid
    return entity_uri(sink["source"], pid) or pid


def execute_export(plan: ExportPlan, credentials, sink_client, resume: dict | None = None) -> dict:
    """Run the plan against a sink, one operation at a time.

    Exactly one export may run per session at a time. A sink failure at op k
    raises PartialExport carrying the receipt prefix and a resume state;
    calling again with that state executes only the remaining ops. Returns
    the receipt: created identifiers keyed by placeholder, landing links,
    and the op count."""
    session_id = plan.session_id
    with _ACTIVE_LOCK:
        if session_id in _ACTIVE_EXPORTS:
            raise ExportInProgress(f"an export for session {session_id} is already running")
        _ACTIVE_EXPORTS.add(session_id)
    try:
        if resume is not None and resume.get("sessionId") != session_id:
            raise ReceiptMismatch("resume state belongs to a different session")
        token = resolve_token(credentials)
        if getattr(sink_client, "requires_auth", False) and not token:
            raise AuthFailed(f"sink {plan.sink.get('source')} requires credentials")
        sink_client.begin(token)

        sparql_sink = plan.sink.get("type") == SINK_SPARQL
        minted = {t: mint_uri(plan.sink["source"], session_id, t) for t in plan.placeholders.values()}
        pids: dict[str, str] = dict(resume.get("createdPids", {})) if resume else {}
        landing: list = list(resume.get("landing", [])) if resume else []
        start = int(resume.get("nextOp", 0)) if resume else 0

        for idx in range(start, len(plan.ops)):
            op = plan.ops[idx]
            try:
                if op.kind == "create-entity":
                    if sparql_sink:
                        pid = minted[op.subject]
                        sink_client.insert_triples(_create_triples(op, pid))
                    else:
                        pid = sink_client.create_entity(
                            op.payload.get("label", ""),
                            op.payload.get("description", ""),
                            op.payload.get("instanceOf", ""),
                        )
                    pids[op.subject] = pid
                    landing.append({"label": op.payload.get("label", ""), "link": _landing_link(plan.sink, pid)})
                elif op.kind == "add-statement":
                    subject = _resolve_identifier(op.subject, pids if not sparql_sink else minted)
                    obj = _resolve_identifier(op.payload["object"], pids if not sparql_sink else minted)
                    if sparql_sink:
                        sink_client.insert_triples([Triple(Uri(subject), Uri(op.payload["predicate"]), Uri(obj))])
                    else:
                        sink_client.add_statement(subject, op.payload["predicate"], obj)
                else:
                    raise SinkError(f"unknown op kind {op.kind!r}", op_index=idx)
            except AuthFailed:
                raise
            except Exception as exc:
                raise PartialExport(
                    f"sink failed at op {idx}: {exc}",
                    receipt={
                        "sessionId": session_id,
                        "sink": dict(plan.sink),
                        "createdPids": dict(pids),
                        "landing": list(landing),
                        "completedOps": idx,
                    },
                    resume={
                        "sessionId": session_id,
                        "nextOp": idx,
                        "createdPids": dict(pids),
                        "landing": list(landing),
                    },
                ) from exc

        return {
            "sessionId": session_id,
            "sink": dict(plan.sink),
            "createdPids": dict(pids),
            "landing": list(landing),
            "opCount": len(plan.ops),
            "executedAt": int(time.time()),
        }
    finally:
        with _ACTIVE_LOCK:
            _ACTIVE_EXPORTS.discard(session_id)


def export_session(session: QuestionnaireSession, sink: dict, credentials, sink_client, schema=None) -> dict:
    """plan + execute + record on the session in one call."""
    plan = plan_export(session, sink, schema)
    receipt = execute_export(plan, credentials, sink_client)
    record_export(session, plan.sink, receipt)
    return receipt


# ---------------------------------------------------------------------------
# PID write-back


def writeback_pids(session: QuestionnaireSession, receipt: dict, schema: CatalogSchema | None = None) -> dict:
    """Attach sink-assigned identifiers to the session's items, keeping each
    ref list ordered by source priority. The session re-validates cleanly
    afterwards; the write-back is recorded in the audit log."""
    schema = schema or session.schema
    if receipt.get("sessionId") != session.session_id:
        raise ReceiptMismatch(
            f"receipt belongs to session {receipt.get('sessionId')!r}, not {session.session_id!r}"
        )
    sink = receipt.get("sink") or {}
    source_id = sink.get("source")
    if not source_id:
        raise ReceiptMismatch("receipt names no sink source")
    mapping = {}
    for token, pid in receipt.get("createdPids", {}).items():
        if not token.startswith(PLACEHOLDER_PREFIX):
            raise ReceiptMismatch(f"unknown placeholder {token!r}")
        key = token[len(PLACEHOLDER_PREFIX):]
        if key not in session.registry:
            raise ReceiptMismatch(f"receipt names unknown item {key!r}")
        item = session.registry.get(key)
        if sink.get("type") == SINK_SPARQL:
            base = ENTITY_URI_BASES.get(source_id, "")
            local_id = pid[len(base):] if base and pid.startswith(base) else pid
            ref = EntityRef(source=source_id, local_id=local_id, label=item.label, uri=pid)
        else:
            ref = EntityRef(source=source_id, local_id=pid, label=item.label)
        if any(r.source == ref.source and r.local_id == ref.local_id for r in item.refs):
            continue
        mapping[key] = ref
    return writeback_pids_event(session, mapping)


# ---------------------------------------------------------------------------
# Credentials


class StaticTokenProvider:
    def __init__(self, token: str):
        self._token = token

    def get_token(self) -> str:
        return self._token


def credentials_from_env(env=None) -> StaticTokenProvider | None:
    import os

    env = env if env is not None else os.environ
    token = env.get("MDK_OAUTH_TOKEN", "")
    return StaticTokenProvider(token) if token else None


def resolve_token(credentials) -> str | None:
    if credentials is None:
        return None
    if isinstance(credentials, str):
        return credentials or None
    if isinstance(credentials, dict):
        return credentials.get("token") or None
    get = getattr(credentials, "get_token", None)
    if callable(get):
        return get() or None
    raise AuthFailed(f"cannot read credentials of type {type(credentials).__name__}")


def device_code_flow(client_id: str, device_endpoint: str, token_endpoint: str, http=None, sleep=None, notify=print, max_polls: int = 60) -> str:
    """OAuth2 device-code grant: request a user code, tell the user where to
    enter it, poll until the token arrives. Returns the bearer token."""
    import requests as _requests

    http = http or _requests
    sleep = sleep or time.sleep
    resp = http.post(device_endpoint, data={"client_id": client_id}, timeout=10.0)
    if resp.status_code >= 300:
        raise AuthFailed(f"device authorization failed with status {resp.status_code}")
    grant = resp.json()
    notify(f"visit {grant.get('verification_uri', '?')} and enter code {grant.get('user_code', '?')}")
    interval = float(grant.get("interval", 5))
    for _ in range(max_polls):
        poll = http.post(
            token_endpoint,
            data={
                "client_id": client_id,
                "device_code": grant.get("device_code", ""),
                "grant_type": "urn:ietf:params:oauth:grant-type:device_code",
            },
            timeout=10.0,
        )
        body = poll.json() if poll.content else {}
        if poll.status_code < 300 and body.get("access_token"):
            return body["access_token"]
        error = body.get("error", "")
        if error in ("authorization_pending", "slow_down"):
            if error == "slow_down":
                interval += 5
            sleep(interval)
            continue
        raise AuthFailed(f"device authorization ended with {error or poll.status_code}")
    raise AuthFailed("device authorization timed out")
