"""Export pipeline: preview, planning, rendering, execution, write-back."""

import json
import threading

import pytest

from generators import missing_model_session
from mdk import interview
from mdk.errors import (
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
from mdk.exporter import (
    EmbeddedStoreSink,
    ExportPlan,
    FixtureWikibaseSink,
    StaticTokenProvider,
    WikibaseHttpSink,
    build_preview,
    credentials_from_env,
    device_code_flow,
    execute_export,
    export_session,
    mint_uri,
    plan_export,
    render_insert_queries,
    resolve_token,
    writeback_pids,
)
from mdk.registry import EntityRef
from mdk.schema import load_schema, serialize_schema
from mdk.search import SearchSpec
from mdk.tripledesk import TripleStore, parse_query
from mdk.validation import validate_session

UZAWA_DB = EntityRef(source="mathalgodb", local_id="a-uzawa", label="Uzawa Iteration")
MAD_BASE = "https://mathalgodb.example.org/id/"
SPARQL_SINK = {"type": "sparql-insert", "source": "mathalgodb"}
WIKIBASE_SINK = {"type": "wikibase", "source": "mardi-portal"}


def algorithm_session(schema, hub, session_id="s-doc"):
    """One selected catalog entity (plus its auto-filled neighbours) and one
    user-authored variant hanging off it."""
    s = interview.start_session("algorithm", schema, session_id=session_id)
    interview.answer_select(s, "algorithm", UZAWA_DB, hub)
    interview.answer_select(s, "algorithm", "Homemade Variant", hub)
    interview.link_items(s, "i0005", "solvesProblem", "i0002")
    interview.set_intra_relation(s, "i0005", "specializes", "i0001")
    interview.set_field(s, "i0005", "description", "a tweak of the classic scheme")
    interview.add_publication(s, "10.5555/saddle.2005", ["i0001"], hub)
    return s


# ------------------------------------------------------------------ preview


def test_preview_documentation_shape(schema, hub):
    s = algorithm_session(schema, hub)
    preview = build_preview(s)
    assert list(preview) == ["kind", "sessionId", "catalog", "sections", "publications"]
    assert preview["kind"] == "documentation"
    assert preview["sessionId"] == "s-doc"
    assert [(sec["page"], [e["key"] for e in sec["items"]]) for sec in preview["sections"]] == [
        ("algorithm", ["i0001", "i0005"]),
        ("algorithmic-problem", ["i0002"]),
        ("software", ["i0003"]),
        ("benchmark", ["i0004"]),
        ("publication", []),
    ]
    entry = preview["sections"][0]["items"][1]
    assert entry["class"] == "Algorithm"
    assert {f["name"]: f["value"] for f in entry["fields"]}["description"] == "a tweak of the classic scheme"
    by_rel = {r["relation"]: r["targets"] for r in entry["relations"]}
    assert by_rel["solvesProblem"] == [{"key": "i0002", "label": "Saddle Point Problem"}]
    assert preview["publications"] == [
        {
            "citation": (
                "Martin Keller, Ines Duarte. Numerical solution of saddle point problems. "
                "Surveys in Computational Mathematics. 2005. https://doi.org/10.5555/saddle.2005"
            ),
            "linkedItems": [{"key": "i0001", "label": "Uzawa Iteration"}],
        }
    ]
    # preview resolves citations and leaves them cached for the export stage
    assert "10.5555/saddle.2005" in s.cached_citations


def test_preview_search_session(schema, hub):
    s = interview.start_session("search", schema, session_id="s-find")
    with pytest.raises(EmptySession, match="no search spec to preview"):
        build_preview(s)
    spec = SearchSpec(target="algorithm", filters=[{"kind": "keyword", "field": "label", "text": "uzawa"}], limit=5)
    interview.set_search_spec(s, spec.to_json())
    preview = build_preview(s)
    assert list(preview) == ["kind", "sessionId", "catalog", "queryText"]
    assert preview["kind"] == "search"
    assert preview["queryText"].startswith("SELECT ?entity ?label ?description WHERE {")


def test_preview_rejects_blank_documentation(schema):
    with pytest.raises(EmptySession, match="session documents nothing"):
        build_preview(interview.start_session("algorithm", schema))


# ----------------------------------------------------------------- planning


def test_plan_rejects_bad_sinks(schema, hub):
    s = algorithm_session(schema, hub)
    with pytest.raises(SinkMismatch, match="unknown sink type 'rdf-dump'; one of sparql-insert, wikibase"):
        plan_export(s, {"type": "rdf-dump", "source": "x"})
    with pytest.raises(SinkMismatch, match="sink needs a source id"):
        plan_export(s, {"type": "wikibase"})


def test_plan_gates_on_validation(schema):
    session, task_key = missing_model_session(schema)
    with pytest.raises(ValidationGate) as err:
        plan_export(session, SPARQL_SINK)
    assert str(err.value) == f"session fails validation: missing-required-relation({task_key})"
    assert err.value.detail["passed"] is False
    assert len(err.value.detail["violations"]) == 1


def test_plan_sparql_reuses_known_uris(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), SPARQL_SINK)
    assert plan.placeholders == {"i0005": "new-i0005"}
    assert [op.kind for op in plan.ops] == ["create-entity"] + ["add-statement"] * 5
    create = plan.ops[0]
    assert create.subject == "new-i0005"
    assert create.payload == {
        "itemKey": "i0005",
        "class": "Algorithm",
        "instanceOf": "https://w3id.org/mdk/ontology#Algorithm",
        "label": "Homemade Variant",
        "description": "a tweak of the classic scheme",
    }
    # statements about already-known entities keep their source URIs
    assert [(op.subject, op.payload["relation"], op.payload["object"]) for op in plan.ops[1:]] == [
        (f"{MAD_BASE}a-uzawa", "solvesProblem", f"{MAD_BASE}p-saddle"),
        (f"{MAD_BASE}a-uzawa", "implementedBySoftware", f"{MAD_BASE}s-fenics"),
        (f"{MAD_BASE}a-uzawa", "testedOnBenchmark", f"{MAD_BASE}b-stokes"),
        ("new-i0005", "solvesProblem", f"{MAD_BASE}p-saddle"),
        ("new-i0005", "specializes", f"{MAD_BASE}a-uzawa"),
    ]


def test_plan_wikibase_creates_everything(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), WIKIBASE_SINK)
    assert plan.placeholders == {f"i000{i}": f"new-i000{i}" for i in range(1, 6)}
    creates = [op for op in plan.ops if op.kind == "create-entity"]
    assert [op.payload["instanceOf"] for op in creates] == [
        "Q6000015",  # Algorithm
        "Q6000016",  # AlgorithmicProblem
        "Q6000004",  # Software
        "Q6000017",  # Benchmark
        "Q6000015",
    ]
    statements = [op for op in plan.ops if op.kind == "add-statement"]
    assert [op.payload["predicate"] for op in statements] == ["P921", "P2283", "P5131", "P921", "P279"]
    assert all(op.subject.startswith("new-") and op.payload["object"].startswith("new-") for op in statements)


def test_plan_wikibase_missing_class_mapping(schema, hub):
    s = algorithm_session(schema, hub)
    with pytest.raises(MissingPredicateMapping, match="schema maps no wikidata class id for AlgorithmicProblem"):
        plan_export(s, {"type": "wikibase", "source": "wikidata"})


def test_plan_wikibase_missing_relation_mapping(schema, hub):
    # patch a wikidata qid onto every class so the relation check is reached
    doc = json.loads(serialize_schema(schema))
    for c in doc["classes"]:
        c.setdefault("wikibase", {}).setdefault("wikidata", "Q1")
    patched = load_schema(json.dumps(doc))
    s = algorithm_session(schema, hub)
    with pytest.raises(
        MissingPredicateMapping,
        match=r"schema maps no wikidata property for relation solvesProblem \(Algorithm\)",
    ):
        plan_export(s, {"type": "wikibase", "source": "wikidata"}, patched)


def test_plan_skips_publication_items(schema, hub):
    s = algorithm_session(schema, hub)
    interview.answer_select(
        s,
        "publication",
        EntityRef(source="mathalgodb", local_id="pub-saddle-2005", label="Keller and Duarte 2005"),
        hub,
    )
    assert any(s.registry.get(k).class_name == "Publication" for k in s.registry.items)
    plan = plan_export(s, SPARQL_SINK)
    assert len(plan.ops) == 6
    assert all("pub" not in op.subject for op in plan.ops)


def test_plan_round_trips_as_json(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), WIKIBASE_SINK)
    again = ExportPlan.from_json(json.loads(json.dumps(plan.to_json())))
    assert again.to_json() == plan.to_json()


# ---------------------------------------------------------------- rendering


def test_mint_uri_is_deterministic(schema):
    a = mint_uri("mathalgodb", "s-1", "new-i0005")
    assert a == mint_uri("mathalgodb", "s-1", "new-i0005")
    assert a.startswith(f"{MAD_BASE}n")
    assert a != mint_uri("mathalgodb", "s-1", "new-i0006")
    assert a != mint_uri("mathalgodb", "s-2", "new-i0005")
    assert mint_uri("someplace", "s-1", "new-i0005").startswith("urn:mdk:someplace:n")


def test_render_whole_plan(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), SPARQL_SINK)
    queries = render_insert_queries(plan)
    assert len(queries) == 1
    assert queries == render_insert_queries(plan)
    insert = parse_query(queries[0])
    assert insert.form == "insert-data"
    # 3 triples for the one created entity, 5 statements
    assert len(insert.triples) == 8
    minted = mint_uri("mathalgodb", plan.session_id, "new-i0005")
    subjects = {t.subject.value for t in insert.triples}
    assert minted in subjects
    assert f"{MAD_BASE}a-uzawa" in subjects


def test_render_per_op(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), SPARQL_SINK)
    queries = render_insert_queries(plan, granularity="op")
    assert len(queries) == len(plan.ops) == 6
    parsed = [parse_query(q) for q in queries]
    assert [len(p.triples) for p in parsed] == [3, 1, 1, 1, 1, 1]
    whole = parse_query(render_insert_queries(plan)[0])
    assert [t for p in parsed for t in p.triples] == list(whole.triples)


def test_render_rejections_and_empty_plan(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), WIKIBASE_SINK)
    with pytest.raises(SinkMismatch, match="cannot render 'wikibase' plan as INSERT queries"):
        render_insert_queries(plan)
    sparql_plan = plan_export(algorithm_session(schema, hub, session_id="s-doc2"), SPARQL_SINK)
    with pytest.raises(SinkMismatch, match="unknown rendering granularity 'triple'"):
        render_insert_queries(sparql_plan, granularity="triple")
    assert render_insert_queries(ExportPlan(session_id="s-x", sink=dict(SPARQL_SINK))) == []


# ---------------------------------------------------------------- execution


def test_execute_into_embedded_store(schema, hub):
    s = algorithm_session(schema, hub)
    plan = plan_export(s, SPARQL_SINK)
    store = TripleStore()
    receipt = execute_export(plan, None, EmbeddedStoreSink(store, "mathalgodb"))
    minted = mint_uri("mathalgodb", "s-doc", "new-i0005")
    assert receipt["createdPids"] == {"new-i0005": minted}
    assert receipt["landing"] == [{"label": "Homemade Variant", "link": minted}]
    assert receipt["opCount"] == 6
    assert isinstance(receipt["executedAt"], int)
    # the store ends up with exactly the rendered triples
    rendered = parse_query(render_insert_queries(plan)[0])
    assert sorted(store.triples(), key=repr) == sorted(rendered.triples, key=repr)


def test_execute_wikibase_fixture(schema, hub):
    s = algorithm_session(schema, hub)
    plan = plan_export(s, WIKIBASE_SINK)
    sink = FixtureWikibaseSink("mardi-portal")
    receipt = execute_export(plan, StaticTokenProvider("fixture-token"), sink)
    assert receipt["createdPids"] == {
        "new-i0001": "Q6032641",
        "new-i0002": "Q6032642",
        "new-i0003": "Q6032643",
        "new-i0004": "Q6032644",
        "new-i0005": "Q6032645",
    }
    assert receipt["landing"][0] == {
        "label": "Uzawa Iteration",
        "link": "https://portal.example.org/entity/Q6032641",
    }
    assert receipt["opCount"] == 10
    uzawa = sink.entities["Q6032641"]
    assert uzawa["instanceOf"] == "Q6000015"
    assert uzawa["claims"] == {"P921": ["Q6032642"], "P2283": ["Q6032643"], "P5131": ["Q6032644"]}
    assert sink.entities["Q6032645"]["claims"] == {"P921": ["Q6032642"], "P279": ["Q6032641"]}


def test_execute_auth_failures_leave_no_trace(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), WIKIBASE_SINK)
    sink = FixtureWikibaseSink("mardi-portal")
    with pytest.raises(AuthFailed, match="rejected the supplied token"):
        execute_export(plan, "wrong-token", sink)
    assert sink.entities == {}
    with pytest.raises(AuthFailed, match="requires credentials"):
        execute_export(plan, None, sink)
    # the per-session export slot was released both times
    with pytest.raises(AuthFailed):
        execute_export(plan, {"token": ""}, sink)


def test_execute_rejects_concurrent_export(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), WIKIBASE_SINK)
    inner = FixtureWikibaseSink("mardi-portal")
    entered = threading.Event()
    release = threading.Event()

    class Blocking:
        requires_auth = True

        def begin(self, token):
            inner.begin(token)

        def create_entity(self, *args):
            entered.set()
            release.wait(timeout=10)
            return inner.create_entity(*args)

        def add_statement(self, *args):
            return inner.add_statement(*args)

    worker = threading.Thread(target=execute_export, args=(plan, "fixture-token", Blocking()))
    worker.start()
    try:
        assert entered.wait(timeout=10)
        with pytest.raises(ExportInProgress, match="already running"):
            execute_export(plan, "fixture-token", FixtureWikibaseSink("mardi-portal"))
    finally:
        release.set()
        worker.join(timeout=10)
    # slot released after the worker finished
    execute_export(plan, "fixture-token", FixtureWikibaseSink("mardi-portal"))


class CountingSink:
    """Delegates to a fixture sink, counting ops and failing once when told."""

    requires_auth = True

    def __init__(self, inner, fail_at=None):
        self.inner = inner
        self.fail_at = fail_at
        self.calls = 0

    def begin(self, token):
        self.inner.begin(token)

    def _gate(self):
        if self.fail_at is not None and self.calls == self.fail_at:
            raise RuntimeError("disk full")
        self.calls += 1

    def create_entity(self, *args):
        self._gate()
        return self.inner.create_entity(*args)

    def add_statement(self, *args):
        self._gate()
        return self.inner.add_statement(*args)


@pytest.mark.parametrize("fail_at", [2, 7])
def test_partial_export_resumes_each_op_exactly_once(schema, hub, fail_at):
    s = algorithm_session(schema, hub, session_id=f"s-part{fail_at}")
    plan = plan_export(s, WIKIBASE_SINK)
    fixture = FixtureWikibaseSink("mardi-portal")
    flaky = CountingSink(fixture, fail_at=fail_at)
    with pytest.raises(PartialExport) as err:
        execute_export(plan, "fixture-token", flaky)
    assert str(err.value) == f"sink failed at op {fail_at}: disk full"
    receipt = err.value.receipt
    assert receipt["completedOps"] == fail_at
    assert len(receipt["createdPids"]) == min(fail_at, 5)
    assert err.value.resume["nextOp"] == fail_at
    assert err.value.resume["createdPids"] == receipt["createdPids"]

    follower = CountingSink(fixture)
    final = execute_export(plan, "fixture-token", follower, resume=err.value.resume)
    assert flaky.calls + follower.calls == len(plan.ops)
    assert final["opCount"] == 10
    assert final["createdPids"] == {f"new-i000{i}": f"Q603264{i}" for i in range(1, 6)}
    assert fixture.entities["Q6032641"]["claims"] == {
        "P921": ["Q6032642"],
        "P2283": ["Q6032643"],
        "P5131": ["Q6032644"],
    }


def test_resume_for_wrong_session_is_rejected(schema, hub):
    plan = plan_export(algorithm_session(schema, hub), WIKIBASE_SINK)
    with pytest.raises(ReceiptMismatch, match="resume state belongs to a different session"):
        execute_export(plan, "fixture-token", FixtureWikibaseSink("mardi-portal"), resume={"sessionId": "other"})


def test_export_session_records_receipt(schema, hub):
    s = algorithm_session(schema, hub)
    store = TripleStore()
    receipt = export_session(s, SPARQL_SINK, None, EmbeddedStoreSink(store, "mathalgodb"))
    assert s.receipts == [receipt]
    tail = s.audit_log[-1]
    assert tail["event"] == "exported"
    assert tail["sink"] == SPARQL_SINK
    assert tail["receipt"] == receipt


# --------------------------------------------------------------- write-back


def test_writeback_sparql_pids(schema, hub):
    s = algorithm_session(schema, hub)
    plan = plan_export(s, SPARQL_SINK)
    receipt = execute_export(plan, None, EmbeddedStoreSink(TripleStore(), "mathalgodb"))
    applied = writeback_pids(s, receipt)
    minted = mint_uri("mathalgodb", "s-doc", "new-i0005")
    local = minted[len(MAD_BASE):]
    assert applied == {
        "i0005": {
            "source": "mathalgodb",
            "localId": local,
            "label": "Homemade Variant",
            "description": "",
            "uri": minted,
        }
    }
    item = s.registry.get("i0005")
    # the minted ref outranks the user ref, so it leads the list
    assert [(r.source, r.local_id) for r in item.refs] == [("mathalgodb", local), ("user", "")]
    assert s.audit_log[-1]["event"] == "pids-written-back"
    assert validate_session(s, schema).passed
    replayed = interview.replay_audit(s.audit_log, schema)
    assert interview.serialize_session(replayed) == interview.serialize_session(s)


def test_writeback_wikibase_pids_for_every_item(schema, hub):
    s = algorithm_session(schema, hub)
    plan = plan_export(s, WIKIBASE_SINK)
    receipt = execute_export(plan, "fixture-token", FixtureWikibaseSink("mardi-portal"))
    applied = writeback_pids(s, receipt)
    assert sorted(applied) == ["i0001", "i0002", "i0003", "i0004", "i0005"]
    # catalog-backed item: the new ref slots in after the higher-priority one
    assert [(r.source, r.local_id) for r in s.registry.get("i0001").refs] == [
        ("mathalgodb", "a-uzawa"),
        ("mardi-portal", "Q6032641"),
    ]
    assert [(r.source, r.local_id) for r in s.registry.get("i0005").refs] == [
        ("mardi-portal", "Q6032645"),
        ("user", ""),
    ]
    assert validate_session(s, schema).passed


def test_writeback_is_idempotent(schema, hub):
    s = algorithm_session(schema, hub)
    plan = plan_export(s, SPARQL_SINK)
    receipt = execute_export(plan, None, EmbeddedStoreSink(TripleStore(), "mathalgodb"))
    writeback_pids(s, receipt)
    refs_before = [r.to_json() for r in s.registry.get("i0005").refs]
    events_before = len(s.audit_log)
    assert writeback_pids(s, receipt) == {}
    assert [r.to_json() for r in s.registry.get("i0005").refs] == refs_before
    assert len(s.audit_log) == events_before


def test_writeback_receipt_mismatches(schema, hub):
    s = algorithm_session(schema, hub)
    plan = plan_export(s, SPARQL_SINK)
    receipt = execute_export(plan, None, EmbeddedStoreSink(TripleStore(), "mathalgodb"))
    with pytest.raises(ReceiptMismatch, match="receipt belongs to session 'other'"):
        writeback_pids(s, dict(receipt, sessionId="other"))
    with pytest.raises(ReceiptMismatch, match="receipt names no sink source"):
        writeback_pids(s, dict(receipt, sink={}))
    with pytest.raises(ReceiptMismatch, match="unknown placeholder 'Q1'"):
        writeback_pids(s, dict(receipt, createdPids={"Q1": "x"}))
    with pytest.raises(ReceiptMismatch, match="receipt names unknown item 'i9999'"):
        writeback_pids(s, dict(receipt, createdPids={"new-i9999": "x"}))


# -------------------------------------------------------------- credentials


def test_resolve_token_accepts_common_shapes():
    assert resolve_token(None) is None
    assert resolve_token("") is None
    assert resolve_token("tok") == "tok"
    assert resolve_token({"token": "t"}) == "t"
    assert resolve_token({"token": ""}) is None
    assert resolve_token(StaticTokenProvider("x")) == "x"
    with pytest.raises(AuthFailed, match="cannot read credentials of type int"):
        resolve_token(42)


def test_credentials_from_env():
    provider = credentials_from_env({"MDK_OAUTH_TOKEN": "abc"})
    assert provider.get_token() == "abc"
    assert credentials_from_env({}) is None


class FakeResponse:
    def __init__(self, status_code, body=None, text=""):
        self.status_code = status_code
        self._body = body
        self.text = text or (json.dumps(body) if body is not None else "")
        self.content = self.text.encode()

    def json(self):
        return self._body


class FakeHttp:
    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, **kwargs):
        self.requests.append((url, kwargs))
        return self.responses.pop(0)


def test_device_code_flow_polls_until_token():
    http = FakeHttp(
        [
            FakeResponse(200, {"device_code": "d", "user_code": "U-1", "verification_uri": "https://v", "interval": 1}),
            FakeResponse(400, {"error": "authorization_pending"}),
            FakeResponse(400, {"error": "slow_down"}),
            FakeResponse(200, {"access_token": "tok-9"}),
        ]
    )
    sleeps = []
    shown = []
    token = device_code_flow("client-1", "https://auth/device", "https://auth/token", http=http, sleep=sleeps.append, notify=shown.append)
    assert token == "tok-9"
    assert sleeps == [1.0, 6.0]  # slow_down bumps the interval
    assert shown == ["visit https://v and enter code U-1"]
    assert http.requests[0][0] == "https://auth/device"
    assert http.requests[1][1]["data"]["grant_type"] == "urn:ietf:params:oauth:grant-type:device_code"


def test_device_code_flow_failures():
    with pytest.raises(AuthFailed, match="device authorization failed with status 500"):
        device_code_flow("c", "https://a/d", "https://a/t", http=FakeHttp([FakeResponse(500)]), sleep=lambda _: None)
    http = FakeHttp(
        [
            FakeResponse(200, {"device_code": "d", "user_code": "U", "interval": 0}),
            FakeResponse(400, {"error": "access_denied"}),
        ]
    )
    with pytest.raises(AuthFailed, match="device authorization ended with access_denied"):
        device_code_flow("c", "https://a/d", "https://a/t", http=http, sleep=lambda _: None, notify=lambda _: None)
    http = FakeHttp(
        [
            FakeResponse(200, {"device_code": "d", "user_code": "U", "interval": 0}),
            FakeResponse(400, {"error": "authorization_pending"}),
            FakeResponse(400, {"error": "authorization_pending"}),
        ]
    )
    with pytest.raises(AuthFailed, match="device authorization timed out"):
        device_code_flow("c", "https://a/d", "https://a/t", http=http, sleep=lambda _: None, notify=lambda _: None, max_polls=2)


def test_wikibase_http_sink_calls():
    http = FakeHttp([FakeResponse(200, {"id": "Q77"}), FakeResponse(204)])
    sink = WikibaseHttpSink("mardi-portal", "https://wb.example.org/w/rest.php/", http=http)
    sink.begin("secret")
    assert sink.create_entity("L", "D", "Q6000015") == "Q77"
    sink.add_statement("Q77", "P921", "Q78")
    create_url, create_kwargs = http.requests[0]
    assert create_url == "https://wb.example.org/w/rest.php/entities/items"
    assert create_kwargs["headers"]["Authorization"] == "Bearer secret"
    assert create_kwargs["json"]["item"]["labels"] == {"en": "L"}
    statement_url, statement_kwargs = http.requests[1]
    assert statement_url == "https://wb.example.org/w/rest.php/entities/items/Q77/statements"
    assert statement_kwargs["json"]["statement"]["property"] == {"id": "P921"}


def test_wikibase_http_sink_errors():
    sink = WikibaseHttpSink("mardi-portal", "https://wb.example.org", http=FakeHttp([FakeResponse(401)]))
    with pytest.raises(AuthFailed, match="requires a bearer token"):
        sink.begin("")
    sink.begin("t")
    with pytest.raises(AuthFailed, match="rejected the supplied token"):
        sink.create_entity("L", "D", "Q1")
    sink = WikibaseHttpSink("mardi-portal", "https://wb.example.org", http=FakeHttp([FakeResponse(500, text="boom")]))
    sink.begin("t")
    with pytest.raises(SinkError, match="returned 500") as err:
        sink.add_statement("Q1", "P1", "Q2")
    assert err.value.sink_message == "boom"
