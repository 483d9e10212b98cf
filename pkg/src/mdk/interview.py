"""The questionnaire engine.

A session is event-sourced: every state change appends a self-contained event
to the audit log, keyed by sequence number only. Replaying the log from an
empty session rebuilds the exact same state, and serialization is canonical
(fixed key order, no wall-clock data), so two drivers performing the same
operations produce byte-identical session documents.

Selection is where the federation work happens: a chosen external entity is
verified against higher-priority sources, its info box populated from the
winning source, and the catalog's automation scheme walked to pull in all
downstream items that the source can provide.
"""

from __future__ import annotations

import json
import uuid

from .errors import (
    ClassMismatch,
    FormMismatch,
    InvalidDoi,
    ParseError,
    SchemaMismatch,
    SourceUnavailable,
    UnknownItem,
    UnknownPage,
    UnknownRelation,
    VersionMismatch,
)
from .registry import PROV_USER, EntityRef, Item, ItemRegistry, prov_auto, resolve_to_preferred, source_rank, user_ref
from .schema import CatalogSchema
from .sources import PublicationRecord, normalize_doi

DOCUMENTATION_CATALOGS = ("model", "algorithm", "workflow")
SEARCH_CATALOG = "search"


class QuestionnaireSession:
    def __init__(self, session_id: str, catalog_id: str, schema: CatalogSchema):
        self.session_id = session_id
        self.catalog_id = catalog_id
        self.schema = schema
        self.registry = ItemRegistry(schema)
        self.page_states: dict[str, dict] = {p.id: {"selected": []} for p in schema.catalog(catalog_id).pages}
        self.publications: list[dict] = []  # {"record": PublicationRecord, "linkedItemKeys": [...]}
        self.search_spec: dict | None = None
        self.cached_citations: dict[str, str] = {}
        self.receipts: list[dict] = []
        self.audit_log: list[dict] = []
        self._seq = 0

    def log(self, event_kind: str, **payload) -> dict:
        self._seq += 1
        event = {"seq": self._seq, "event": event_kind}
        event.update(payload)
        self.audit_log.append(event)
        return event

    def page(self, page_id: str):
        for p in self.schema.catalog(self.catalog_id).pages:
            if p.id == page_id:
                return p
        raise UnknownPage(f"catalog {self.catalog_id!r} has no page {page_id!r}")

    def page_for_class(self, class_name: str) -> str | None:
        for p in self.schema.catalog(self.catalog_id).pages:
            if p.class_name == class_name:
                return p.id
        return None

    def require_item(self, key: str) -> Item:
        if key not in self.registry:
            raise UnknownItem(f"no item {key!r} in session {self.session_id}")
        return self.registry.get(key)


def start_session(catalog_id: str, schema: CatalogSchema, session_id: str | None = None) -> QuestionnaireSession:
    schema.catalog(catalog_id)  # UnknownCatalog on bad ids
    sid = session_id or "s-" + uuid.uuid4().hex[:12]
    session = QuestionnaireSession(sid, catalog_id, schema)
    session.log("session-started", sessionId=sid, catalog=catalog_id, schemaVersion=schema.schema_version)
    return session


# ---------------------------------------------------------------------------
# Selection and automation


def _select_on_page(session: QuestionnaireSession, page_id: str, key: str) -> bool:
    selected = session.page_states.setdefault(page_id, {"selected": []})["selected"]
    if key not in selected:
        selected.append(key)
        return True
    return False


def _register(session, class_name, refs, fields, provenance, origin, page_id=None):
    """Register an item (or return the existing key) and log the event.

    An item counts as already present when any of its refs is carried by a
    registered item of the class, or when a registered item of the class
    bears the same label (the same matching rules resolution uses)."""
    existing = None
    for r in refs:
        if r.source != "user":
            existing = session.registry.find_by_ref(class_name, r.source, r.local_id)
            if existing:
                break
    if existing is None:
        label = str(fields.get("name", "") or refs[0].label)
        if label:
            existing = session.registry.find_by_label(class_name, label)
    if existing is not None:
        if page_id is None:
            page_id = session.page_for_class(class_name)
        if page_id and _select_on_page(session, page_id, existing):
            session.log("page-selected", page=page_id, key=existing)
        return existing, True
    item = Item(key="", class_name=class_name, refs=list(refs), fields=dict(fields), provenance=dict(provenance))
    before = len(session.registry)
    key = session.registry.register_item(item)
    reused = len(session.registry) == before
    if not reused:
        if page_id is None:
            page_id = session.page_for_class(class_name)
        session.log(
            "item-registered",
            key=key,
            **{"class": class_name},
            refs=[r.to_json() for r in refs],
            fields=dict(fields),
            provenance=dict(provenance),
            origin=origin,
            page=page_id,
        )
        if page_id:
            _select_on_page(session, page_id, key)
    return key, reused


def _link(session, from_key: str, rel_name: str, to_key: str, provenance: str) -> bool:
    """Record a relation edge; returns False when the edge already exists."""
    item = session.registry.get(from_key)
    targets = item.relations.setdefault(rel_name, [])
    if to_key in targets:
        return False
    targets.append(to_key)
    item.provenance.setdefault(rel_name, provenance)
    session.log("relation-linked", fromKey=from_key, relation=rel_name, toKey=to_key, provenance=provenance)
    return True


def answer_select(session: QuestionnaireSession, page_id: str, choice, hub) -> dict:
    """Answer a selection question: verify the choice against higher-priority
    sources, populate its info box from the winning source, register it, and
    auto-insert everything downstream. `choice` is an EntityRef for external
    selections or a string label for a manual stub.

    The report lists the resolution trail, populated fields, auto-inserted
    items, and any degradation warnings.
    """
    page = session.page(page_id)
    if page.class_name is None:
        raise FormMismatch(f"page {page_id!r} takes no item selection")
    class_name = page.class_name
    report = {"key": None, "reused": False, "resolution": None, "populatedFields": [], "insertedItems": [], "warnings": []}

    if isinstance(choice, str):
        if not choice.strip():
            raise ClassMismatch("manual entry needs a non-empty label")
        key, reused = _register(
            session, class_name, [user_ref(choice.strip())], {"name": choice.strip()}, {"name": PROV_USER}, "manual-stub", page.id
        )
        report.update(key=key, reused=reused)
        return report

    ref: EntityRef = choice
    accepted = session.schema.search_classes(class_name)
    if ref.source != "user":
        try:
            doc = hub.get_entity(ref.source, ref.local_id)
            if doc.class_name and doc.class_name not in accepted:
                raise ClassMismatch(
                    f"{ref.source}:{ref.local_id} is a {doc.class_name}, page {page_id!r} documents {class_name}"
                )
        except SourceUnavailable:
            pass  # degrade below on fetch

    resolved, trail = resolve_to_preferred(ref, class_name, hub, session.schema)
    if trail:
        session.log(
            "resolution",
            page=page.id,
            fromRef=ref.to_json(),
            toRef=resolved.to_json(),
            trail=[dict(t) for t in trail],
        )
    report["resolution"] = {"from": ref.to_json(), "to": resolved.to_json(), "trail": [dict(t) for t in trail]}

    refs = [resolved]
    if resolved != ref:
        refs.append(ref)

    try:
        details = hub.fetch_details(resolved, class_name)
    except SourceUnavailable:
        report["warnings"].append(f"source {resolved.source} unavailable, item registered without details")
        key, reused = _register(
            session, class_name, refs, {"name": resolved.label}, {"name": prov_auto(resolved.source)}, "degraded-selection", page.id
        )
        report.update(key=key, reused=reused)
        return report

    fields = dict(details["fields"])
    provenance = {name: prov_auto(resolved.source) for name in fields}
    key, reused = _register(session, class_name, refs, fields, provenance, "selection", page.id)
    report.update(key=key, reused=reused, populatedFields=sorted(fields))
    if reused:
        return report

    inserted = apply_automation(session, key, hub, _details=details, _warnings=report["warnings"])
    report["insertedItems"] = [
        {"key": k, "class": session.registry.get(k).class_name, "label": session.registry.get(k).label, "page": session.page_for_class(session.registry.get(k).class_name)}
        for k in inserted
    ]
    return report


def apply_automation(session: QuestionnaireSession, item_key: str, hub, _details=None, _warnings=None, _visited=None) -> list:
    """Walk the catalog's automation scheme from one item, inserting every
    downstream item its source provides. Targets already in the session are
    linked, not duplicated; newly inserted items recurse. Returns new keys in
    insertion order. Source failures never abort the walk: the affected
    target becomes a stub and a warning is recorded."""
    item = session.require_item(item_key)
    warnings = _warnings if _warnings is not None else []
    visited = _visited if _visited is not None else set()
    if item_key in visited:
        return []
    visited.add(item_key)

    top = item.top_ref
    if top.source == "user":
        return []
    if _details is None:
        try:
            _details = hub.fetch_details(top, item.class_name)
        except SourceUnavailable:
            warnings.append(f"source {top.source} unavailable, downstream items of {item_key} skipped")
            return []

    inserted: list[str] = []
    for rel, target_class in session.schema.automation_edges(session.catalog_id, item.class_name):
        for target_ref in _details["relations"].get(rel.name, []):
            existing = session.registry.find_by_ref(target_class, target_ref.source, target_ref.local_id)
            if existing is None:
                existing = session.registry.find_by_label(target_class, target_ref.label)
            if existing is not None:
                _link(session, item_key, rel.name, existing, prov_auto(top.source))
                continue
            try:
                target_details = hub.fetch_details(target_ref, target_class)
                fields = dict(target_details["fields"])
            except SourceUnavailable:
                target_details = {"fields": {}, "relations": {}}
                fields = {"name": target_ref.label}
                warnings.append(f"source {target_ref.source} unavailable, {target_ref.label!r} inserted as stub")
            provenance = {name: prov_auto(target_ref.source) for name in fields}
            new_key, reused = _register(session, target_class, [target_ref], fields, provenance, "automation")
            _link(session, item_key, rel.name, new_key, prov_auto(top.source))
            if not reused:
                inserted.append(new_key)
                inserted.extend(
                    apply_automation(session, new_key, hub, _details=target_details, _warnings=warnings, _visited=visited)
                )
    return inserted


# ---------------------------------------------------------------------------
# Manual edits


def link_items(session: QuestionnaireSession, from_key: str, relation_name: str, to_key: str, provenance: str = PROV_USER) -> dict:
    """Record a typed relation between two registered items."""
    source = session.require_item(from_key)
    target = session.require_item(to_key)
    candidates = session.schema.relations_named(relation_name)
    if not candidates:
        raise UnknownRelation(f"no relation named {relation_name!r}")
    rel = session.schema.relation_for(relation_name, source.class_name)
    if rel is None:
        domains = ", ".join(sorted({c.domain_class for c in candidates}))
        raise ClassMismatch(f"{relation_name!r} applies to {domains}, not {source.class_name}")
    if target.class_name != rel.range_class:
        raise ClassMismatch(f"{relation_name!r} targets {rel.range_class}, not {target.class_name}")
    warnings = []
    if from_key == to_key:
        warnings.append("self-relation")
    _link(session, from_key, relation_name, to_key, provenance)
    return {"fromKey": from_key, "relation": relation_name, "toKey": to_key, "warnings": warnings}


def set_intra_relation(session: QuestionnaireSession, from_key: str, relation_name: str, to_key: str) -> dict:
    """Record an optional within-class relation (generalizes, approximates,
    is-similar-to). Never required for validation or export."""
    candidates = session.schema.relations_named(relation_name)
    if not candidates:
        raise UnknownRelation(f"no relation named {relation_name!r}")
    source = session.require_item(from_key)
    rel = session.schema.relation_for(relation_name, source.class_name)
    if rel is None:
        domains = ", ".join(sorted({c.domain_class for c in candidates}))
        raise ClassMismatch(f"{relation_name!r} applies to {domains}, not {source.class_name}")
    if not rel.intra_class:
        raise SchemaMismatch(f"{relation_name!r} is not an intra-class relation")
    return link_items(session, from_key, relation_name, to_key, PROV_USER)


def set_field(session: QuestionnaireSession, key: str, field_name: str, value) -> dict:
    """Manually set an info-box field; overwriting an auto-filled value flips
    its provenance to user-entered (logged like any other edit)."""
    item = session.require_item(key)
    class_def = session.schema.class_def(item.class_name)
    if field_name not in {f.name for f in class_def.info_box_fields}:
        raise SchemaMismatch(f"class {item.class_name!r} declares no field {field_name!r}")
    item.fields[field_name] = value
    item.provenance[field_name] = PROV_USER
    session.log("field-set", key=key, field=field_name, value=value, provenance=PROV_USER)
    return {"key": key, "field": field_name, "provenance": PROV_USER}


def add_publication(session: QuestionnaireSession, doi_or_ref, linked_item_keys, hub) -> PublicationRecord:
    """Attach a publication to one or more items: DOIs run the resolution
    cascade, URLs are stored verbatim, EntityRefs are taken as-is."""
    keys = list(linked_item_keys)
    for key in keys:
        session.require_item(key)
    if isinstance(doi_or_ref, EntityRef):
        doi = ""
        try:
            doc = hub.get_entity(doi_or_ref.source, doi_or_ref.local_id)
            doi = str(doc.fields.get("doi", ""))
        except Exception:
            pass
        record = PublicationRecord(doi=doi, title=doi_or_ref.label, url=doi_or_ref.uri, entity_refs=[doi_or_ref])
    elif isinstance(doi_or_ref, str) and doi_or_ref.lower().startswith(("http://", "https://")) and "doi.org" not in doi_or_ref.lower():
        record = PublicationRecord(url=doi_or_ref.strip())
    elif isinstance(doi_or_ref, str):
        record = hub.resolve_publication(normalize_doi(doi_or_ref))
    else:
        raise InvalidDoi(f"cannot interpret publication input {doi_or_ref!r}")
    session.publications.append({"record": record, "linkedItemKeys": keys})
    session.log("publication-added", record=record.to_json(), linkedItemKeys=keys)
    return record


def set_search_spec(session: QuestionnaireSession, spec: dict):
    if session.catalog_id != SEARCH_CATALOG:
        raise FormMismatch(f"catalog {session.catalog_id!r} carries no search spec")
    session.search_spec = dict(spec)
    session.log("search-spec-set", spec=dict(spec))
    return session.search_spec


def cache_citations(session: QuestionnaireSession, citations: dict):
    """Store resolved citation strings for the final export; no-op when
    nothing changed, so repeated previews stay idempotent."""
    fresh = {k: v for k, v in citations.items() if session.cached_citations.get(k) != v}
    if fresh:
        session.cached_citations.update(fresh)
        session.log("citations-cached", citations=dict(fresh))


def record_export(session: QuestionnaireSession, sink: dict, receipt_doc: dict):
    session.receipts.append(receipt_doc)
    session.log("exported", sink=dict(sink), receipt=receipt_doc)


def writeback_pids_event(session: QuestionnaireSession, mapping: dict):
    """Apply minted PIDs to user-only items: mapping is key -> EntityRef."""
    applied = {}
    for key, ref in mapping.items():
        item = session.require_item(key)
        rank = source_rank(session.schema.class_def(item.class_name), ref.source)
        position = 0
        for i, existing in enumerate(item.refs):
            if source_rank(session.schema.class_def(item.class_name), existing.source) <= rank:
                position = i + 1
        item.refs.insert(position, ref)
        applied[key] = ref.to_json()
    if applied:
        session.log("pids-written-back", mapping=applied)
    return applied


# ---------------------------------------------------------------------------
# Serialization


def serialize_session(session: QuestionnaireSession) -> str:
    """Canonical session document: fixed key order, sequence-numbered audit
    log, no wall-clock data. Equal operation histories give equal bytes."""
    doc = {
        "sessionId": session.session_id,
        "catalog": session.catalog_id,
        "schemaVersion": session.schema.schema_version,
        "pageStates": {pid: {"selected": list(state["selected"])} for pid, state in session.page_states.items()},
        "items": [session.registry.get(k).to_json() for k in session.registry.items],
        "publications": [
            {"record": entry["record"].to_json(), "linkedItemKeys": list(entry["linkedItemKeys"])}
            for entry in session.publications
        ],
        "searchSpec": session.search_spec,
        "cachedCitations": dict(sorted(session.cached_citations.items())),
        "receipts": [dict(r) for r in session.receipts],
        "auditLog": [dict(e) for e in session.audit_log],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def deserialize_session(text: str, schema: CatalogSchema) -> QuestionnaireSession:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"session document is not valid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    version = doc.get("schemaVersion")
    if version != schema.schema_version:
        raise VersionMismatch(f"session has schema version {version!r}, loaded schema is {schema.schema_version!r}")
    session = QuestionnaireSession(doc["sessionId"], doc["catalog"], schema)
    session.page_states = {pid: {"selected": list(s.get("selected", []))} for pid, s in doc.get("pageStates", {}).items()}
    max_key = 0
    for item_doc in doc.get("items", []):
        item = Item.from_json(item_doc)
        session.registry.items[item.key] = item
        if item.key.startswith("i"):
            try:
                max_key = max(max_key, int(item.key[1:]))
            except ValueError:
                pass
    session.registry._counter = max_key
    session.publications = [
        {"record": PublicationRecord.from_json(p["record"]), "linkedItemKeys": list(p.get("linkedItemKeys", []))}
        for p in doc.get("publications", [])
    ]
    session.search_spec = doc.get("searchSpec")
    session.cached_citations = dict(doc.get("cachedCitations", {}))
    session.receipts = [dict(r) for r in doc.get("receipts", [])]
    session.audit_log = [dict(e) for e in doc.get("auditLog", [])]
    session._seq = max((e.get("seq", 0) for e in session.audit_log), default=0)
    return session


# ---------------------------------------------------------------------------
# Audit replay


def replay_audit(events, schema: CatalogSchema) -> QuestionnaireSession:
    """Rebuild a session purely from its audit log. No source is consulted:
    each event carries the full effect it had. The rebuilt session serializes
    byte-identically to the original."""
    events = list(events)
    if not events or events[0].get("event") != "session-started":
        raise FormMismatch("audit log must begin with session-started")
    head = events[0]
    if head.get("schemaVersion") != schema.schema_version:
        raise VersionMismatch(
            f"audit log has schema version {head.get('schemaVersion')!r}, loaded schema is {schema.schema_version!r}"
        )
    session = QuestionnaireSession(head["sessionId"], head["catalog"], schema)
    for event in events:
        _apply_event(session, event)
        session.audit_log.append(dict(event))
        session._seq = max(session._seq, event.get("seq", 0))
    return session


def _apply_event(session: QuestionnaireSession, event: dict):
    kind = event["event"]
    if kind in ("session-started", "resolution"):
        return
    if kind == "item-registered":
        item = Item(
            key=event["key"],
            class_name=event["class"],
            refs=[EntityRef.from_json(r) for r in event["refs"]],
            fields=dict(event.get("fields", {})),
            provenance=dict(event.get("provenance", {})),
        )
        session.registry.items[item.key] = item
        if item.key.startswith("i"):
            try:
                session.registry._counter = max(session.registry._counter, int(item.key[1:]))
            except ValueError:
                pass
        if event.get("page"):
            _select_on_page(session, event["page"], item.key)
        return
    if kind == "page-selected":
        _select_on_page(session, event["page"], event["key"])
        return
    if kind == "relation-linked":
        item = session.registry.get(event["fromKey"])
        targets = item.relations.setdefault(event["relation"], [])
        if event["toKey"] not in targets:
            targets.append(event["toKey"])
        item.provenance.setdefault(event["relation"], event.get("provenance", PROV_USER))
        return
    if kind == "field-set":
        item = session.registry.get(event["key"])
        item.fields[event["field"]] = event["value"]
        item.provenance[event["field"]] = event.get("provenance", PROV_USER)
        return
    if kind == "publication-added":
        session.publications.append(
            {"record": PublicationRecord.from_json(event["record"]), "linkedItemKeys": list(event.get("linkedItemKeys", []))}
        )
        return
    if kind == "search-spec-set":
        session.search_spec = dict(event["spec"])
        return
    if kind == "citations-cached":
        session.cached_citations.update(event.get("citations", {}))
        return
    if kind == "exported":
        session.receipts.append(dict(event["receipt"]))
        return
    if kind == "pids-written-back":
        for key, ref_doc in event.get("mapping", {}).items():
            item = session.registry.get(key)
            ref = EntityRef.from_json(ref_doc)
            rank = source_rank(session.schema.class_def(item.class_name), ref.source)
            position = 0
            for i, existing in enumerate(item.refs):
                if source_rank(session.schema.class_def(item.class_name), existing.source) <= rank:
                    position = i + 1
            item.refs.insert(position, ref)
        return
    raise FormMismatch(f"unknown audit event kind {kind!r}")
