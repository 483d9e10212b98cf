"""Query construction and federated execution for the search layer."""

import json
import random
import types

import pytest

from generators import random_search_spec, random_store
from mdk.errors import QueryRejected, SourceUnavailable
from mdk.schema import default_schema
from mdk.search import (
    AllSourcesUnavailable,
    InvalidFilter,
    SearchSpec,
    build_search,
    execute_search,
    summarize_results,
)
from mdk.sources import SourceHub
from mdk.tripledesk import Literal, ParseError, TripleStore, Uri, Triple, evaluate_select, parse_query
from oracles import join_oracle, tables_equal

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
SCHEMA_DESC = "http://schema.org/description"
ONT = "https://w3id.org/mdk/ontology#"


def kw(text, field="label"):
    return {"kind": "keyword", "field": field, "text": text}


def uses(class_name, uri, label=None):
    ref = {"uri": uri}
    if label:
        ref["label"] = label
    return {"kind": "uses-entity", "class": class_name, "ref": ref}


# ---------------------------------------------------------------- build_search


def test_build_uses_entity_and_keyword_exact_text(schema):
    spec = SearchSpec(
        target="algorithm",
        filters=[
            uses("AlgorithmicProblem", "https://w3id.org/mdk/kg/mathalgodb#p-saddle"),
            kw("uzawa"),
        ],
        limit=10,
    )
    assert build_search(spec, schema) == (
        "SELECT ?entity ?label ?description WHERE {\n"
        f"  ?entity <{RDF_TYPE}> <{ONT}Algorithm> .\n"
        f"  ?entity <{RDFS_LABEL}> ?label .\n"
        f"  ?entity <{SCHEMA_DESC}> ?description .\n"
        f"  ?entity <{ONT}solvesProblem> <https://w3id.org/mdk/kg/mathalgodb#p-saddle> .\n"
        '  FILTER regex(?label, "uzawa", "i")\n'
        "}\n"
        "LIMIT 10\n"
    )


def test_build_dotted_walk_exact_text(schema):
    # two hops to Method, then a text variable; "objective" is an alias
    spec = SearchSpec(target="workflow", filters=[kw("iterate (fast)", field="Method.objective")], limit=5)
    assert build_search(spec, schema) == (
        "SELECT ?entity ?label ?description WHERE {\n"
        f"  ?entity <{RDF_TYPE}> <{ONT}Workflow> .\n"
        f"  ?entity <{RDFS_LABEL}> ?label .\n"
        f"  ?entity <{SCHEMA_DESC}> ?description .\n"
        f"  ?entity <{ONT}hasProcessingStep> ?x1 .\n"
        f"  ?x1 <{ONT}usesMethod> ?x2 .\n"
        f"  ?x2 <{SCHEMA_DESC}> ?x3 .\n"
        '  FILTER regex(?x3, "iterate\\\\ \\\\(fast\\\\)", "i")\n'
        "}\n"
        "LIMIT 5\n"
    )


def test_build_bare_objective_alias_and_default_limit(schema):
    text = build_search(SearchSpec(target="model", filters=[kw("flow", field="objective")]), schema)
    assert 'FILTER regex(?description, "flow", "i")' in text
    assert text.endswith("LIMIT 25\n")


def test_build_variable_numbering_continues_across_filters(schema):
    spec = SearchSpec(
        target="workflow",
        filters=[
            kw("steady", field="Method.objective"),
            kw("mesh", field="ProcessingStep.label"),
            uses("Method", "https://ex/m1", label="M one"),
        ],
        limit=7,
    )
    text = build_search(spec, schema)
    assert f"  ?x1 <{ONT}usesMethod> ?x2 .\n" in text
    assert f"  ?x2 <{SCHEMA_DESC}> ?x3 .\n" in text
    assert f"  ?x4 <{RDFS_LABEL}> ?x5 .\n" in text
    # uses-entity walks through a fresh intermediate, last hop hits the uri
    assert f"  ?x6 <{ONT}usesMethod> <https://ex/m1> .\n" in text
    # all patterns precede all FILTER lines
    assert text.index("FILTER regex(?x3") < text.index("FILTER regex(?x5")
    assert text.rindex(" .\n") < text.index("FILTER")


def test_build_is_deterministic_and_survives_json_round_trip(schema):
    spec = SearchSpec(
        target="algorithm",
        filters=[uses("Software", "https://ex/s"), kw("Ångström .*", field="description")],
        limit=3,
    )
    text = build_search(spec, schema)
    assert build_search(spec, schema) == text
    again = SearchSpec.from_json(json.loads(json.dumps(spec.to_json())))
    assert build_search(again, schema) == text
    assert again.to_json() == spec.to_json()


def test_built_text_parses_but_is_not_serializer_canonical(schema):
    text = build_search(SearchSpec(target="model", filters=[kw("x")]), schema)
    query = parse_query(text)
    assert query.form == "select"
    assert [v.name for v in query.variables] == ["entity", "label", "description"]
    assert len(query.patterns) == 3
    assert len(query.filters) == 1


@pytest.mark.parametrize(
    "spec_kwargs, message",
    [
        (dict(target="dataset", filters=[kw("x")]), "unknown search target 'dataset'; one of algorithm, model, workflow"),
        (dict(target="model", filters=[]), "search needs at least one filter"),
        (dict(target="model", filters=[kw("x")], limit=0), "limit must be positive"),
        (
            dict(target="model", filters=[{"kind": "uses-entity", "class": "Gadget", "ref": {"uri": "https://x/1"}}]),
            "uses-entity filter names unknown class 'Gadget'",
        ),
        (
            dict(target="model", filters=[{"kind": "uses-entity", "class": "Quantity"}]),
            "uses-entity filter needs a ref with a uri",
        ),
        (
            dict(target="model", filters=[uses("MathematicalModel", "https://x/1")]),
            "uses-entity filter cannot target the searched class 'MathematicalModel'",
        ),
        (
            dict(target="algorithm", filters=[uses("Workflow", "https://x/1")]),
            "no relation path from Algorithm to Workflow within 3 hops",
        ),
        (dict(target="model", filters=[kw("")]), "keyword filter needs a non-empty text"),
        (dict(target="model", filters=[{"kind": "keyword", "field": "label"}]), "keyword filter needs a non-empty text"),
        (dict(target="model", filters=[kw("x", field="Gadget.label")]), "keyword filter names unknown class 'Gadget'"),
        (
            dict(target="model", filters=[kw("x", field="Quantity.uri")]),
            "keyword filter field must be one of label, description, not 'uri'",
        ),
        (
            dict(target="model", filters=[kw("x", field="Workflow.label")]),
            "no relation path from MathematicalModel to Workflow within 3 hops (keyword filter 'Workflow.label')",
        ),
        (
            dict(target="model", filters=[kw("x", field="title")]),
            "keyword filter field must be one of label, description, not 'title'",
        ),
        (dict(target="model", filters=[{"kind": "regex", "pattern": "x"}]), "unknown filter kind 'regex'"),
    ],
)
def test_build_rejections(schema, spec_kwargs, message):
    with pytest.raises(InvalidFilter) as err:
        build_search(SearchSpec(**spec_kwargs), schema)
    assert str(err.value) == message
    assert err.value.code == "invalid-filter"


def test_whitespace_text_is_a_literal_pattern(schema):
    # only truly empty text is rejected; spaces become an escaped pattern
    text = build_search(SearchSpec(target="model", filters=[kw("  ")]), schema)
    assert 'FILTER regex(?label, "\\\\ \\\\ ", "i")' in text


# ------------------------------------------------------- escaping semantics


def _model_store(labels):
    store = TripleStore()
    for i, label in enumerate(labels):
        subject = Uri(f"https://ex/m{i}")
        store.add(Triple(subject, Uri(RDF_TYPE), Uri(f"{ONT}MathematicalModel")))
        store.add(Triple(subject, Uri(RDFS_LABEL), Literal(label)))
        store.add(Triple(subject, Uri(SCHEMA_DESC), Literal("d")))
    return store


def _matching_labels(schema, text):
    query = parse_query(build_search(SearchSpec(target="model", filters=[kw(text)]), schema))
    store = _model_store(["A.B (x)", "aXb (x)", 'say "hi" \\ done', "ångström unit"])
    table = evaluate_select(store, query)
    idx = table.columns.index("label")
    return [row["label"].text if isinstance(row, dict) else row[idx] for row in table.rows]


def test_metacharacters_match_literally(schema):
    got = _matching_labels(schema, "a.b (x)")
    # the dot must not act as a wildcard
    assert got == ["A.B (x)"]


def test_quotes_and_backslash_round_trip(schema):
    assert _matching_labels(schema, 'say "hi" \\ done') == ['say "hi" \\ done']


def test_unicode_case_insensitive(schema):
    assert _matching_labels(schema, "Ångström") == ["ångström unit"]


# ------------------------------------------------------------ execute_search


UZAWA_SPEC = SearchSpec(target="algorithm", filters=[kw("uzawa")], limit=10)


def test_execute_merges_sources_in_priority_order(schema, hub):
    results = execute_search(UZAWA_SPEC, hub, schema)
    assert list(results.per_source_status) == ["mathalgodb", "mardi-portal", "wikidata"]
    assert results.per_source_status == {
        "mathalgodb": "ok",
        "mardi-portal": "ok",
        "wikidata": "ok",
    }
    refs = [row["ref"] for row in results.rows]
    assert [(r.source, r.local_id) for r in refs] == [
        ("mathalgodb", "a-inexact-uzawa"),
        ("mathalgodb", "a-uzawa"),
        ("wikidata", "Q2603047"),
    ]
    assert refs[1].label == "Uzawa Iteration"
    assert refs[1].uri == "https://mathalgodb.example.org/id/a-uzawa"
    assert refs[2].description == "iterative algorithm for saddle point problems"
    assert all(row["matchedFilters"] == ["keyword label: uzawa"] for row in results.rows)


def test_execute_explicit_source_list(schema, hub):
    spec = SearchSpec(target="algorithm", filters=[kw("uzawa")], sources=["wikidata"], limit=10)
    results = execute_search(spec, hub, schema)
    assert list(results.per_source_status) == ["wikidata"]
    assert [row["ref"].local_id for row in results.rows] == ["Q2603047"]


def test_execute_uses_entity_filter_labels(schema, hub):
    uri = "https://mathalgodb.example.org/id/p-saddle"
    bare = SearchSpec(target="algorithm", filters=[uses("AlgorithmicProblem", uri)], limit=10)
    results = execute_search(bare, hub, schema)
    assert [row["ref"].local_id for row in results.rows] == ["a-inexact-uzawa", "a-uzawa"]
    assert results.rows[0]["matchedFilters"] == [f"uses AlgorithmicProblem: {uri}"]

    labelled = SearchSpec(
        target="algorithm",
        filters=[uses("AlgorithmicProblem", uri, label="Saddle Point Problem")],
        limit=10,
    )
    results = execute_search(labelled, hub, schema)
    assert results.rows[0]["matchedFilters"] == ["uses AlgorithmicProblem: Saddle Point Problem"]


def test_execute_partial_outage_degrades(schema, hub):
    hub.clients["mathalgodb"].down = True
    results = execute_search(UZAWA_SPEC, hub, schema)
    assert results.per_source_status == {
        "mathalgodb": "unavailable: source mathalgodb unavailable",
        "mardi-portal": "ok",
        "wikidata": "ok",
    }
    assert [row["ref"].local_id for row in results.rows] == ["Q2603047"]
    # the down source never reaches the consultation ledger
    assert [(c["source"], c["op"], c["outcome"]) for c in hub.consultations] == [
        ("mardi-portal", "sparql-select", "ok"),
        ("wikidata", "sparql-select", "ok"),
    ]


def test_execute_all_sources_down(schema, hub):
    for sid in ("mathalgodb", "mardi-portal", "wikidata"):
        hub.clients[sid].down = True
    with pytest.raises(AllSourcesUnavailable) as err:
        execute_search(UZAWA_SPEC, hub, schema)
    assert err.value.code == "all-sources-unavailable"
    assert "mathalgodb, mardi-portal, wikidata" in str(err.value)
    assert err.value.detail == {
        "mathalgodb": "unavailable: source mathalgodb unavailable",
        "mardi-portal": "unavailable: source mardi-portal unavailable",
        "wikidata": "unavailable: source wikidata unavailable",
    }


class _StubHub:
    """Serves canned tables per source id; raises where told to."""

    def __init__(self, tables):
        self.tables = tables

    def sparql_select(self, source_id, query):
        value = self.tables[source_id]
        if isinstance(value, Exception):
            raise value
        return types.SimpleNamespace(rows=value)


def _row(uri, label):
    return {"entity": Uri(uri), "label": Literal(label), "description": Literal("")}


def test_execute_first_listed_source_wins_on_shared_uri(schema):
    shared = "https://ex/thing/e1"
    hub = _StubHub(
        {
            "alpha": [_row(shared, "from alpha")],
            "beta": [_row(shared, "from beta"), _row("https://ex/thing/e2", "beta only")],
        }
    )
    spec = SearchSpec(target="algorithm", filters=[kw("x")], sources=["alpha", "beta"], limit=10)
    results = execute_search(spec, hub, schema)
    assert results.per_source_status == {"alpha": "ok", "beta": "ok"}
    assert [(r["ref"].source, r["ref"].local_id, r["ref"].label) for r in results.rows] == [
        ("alpha", "e1", "from alpha"),
        ("beta", "e2", "beta only"),
    ]


def test_execute_query_rejected_counts_as_unavailable(schema):
    hub = _StubHub(
        {
            "alpha": QueryRejected("alpha said no"),
            "beta": [_row("https://ex/thing/e2", "fine")],
        }
    )
    spec = SearchSpec(target="algorithm", filters=[kw("x")], sources=["alpha", "beta"], limit=10)
    results = execute_search(spec, hub, schema)
    assert results.per_source_status["alpha"] == "unavailable: alpha said no"
    assert [r["ref"].local_id for r in results.rows] == ["e2"]


def test_execute_rows_missing_entity_cell_are_dropped(schema):
    hub = _StubHub({"alpha": [{"label": Literal("no uri")}, _row("https://ex/thing/e3", "ok")]})
    spec = SearchSpec(target="algorithm", filters=[kw("x")], sources=["alpha"], limit=10)
    results = execute_search(spec, hub, schema)
    assert [r["ref"].local_id for r in results.rows] == ["e3"]


def test_results_to_json_shape(schema, hub):
    payload = execute_search(UZAWA_SPEC, hub, schema).to_json()
    assert set(payload) == {"queryText", "rows", "perSourceStatus"}
    assert payload["rows"][0]["ref"]["localId"] == "a-inexact-uzawa"
    assert payload["rows"][0]["matchedFilters"] == ["keyword label: uzawa"]


# ---------------------------------------------------------------- summaries


def test_summarize_full_shape(schema, hub):
    summary = summarize_results(execute_search(UZAWA_SPEC, hub, schema))
    lines = summary.splitlines()
    assert lines[0] == "3 result(s)"
    assert "[mathalgodb] 2 hit(s)" in lines
    assert "[mardi-portal] 0 hit(s)" in lines
    assert "[wikidata] 1 hit(s)" in lines
    assert "  - Uzawa Iteration" in lines
    assert "    Iterative solver for saddle point systems arising from constrained optimization." in lines
    assert "    https://mathalgodb.example.org/id/a-uzawa" in lines
    assert "query:" in lines
    assert "  SELECT ?entity ?label ?description WHERE {" in lines
    assert lines.index("query:") > lines.index("[wikidata] 1 hit(s)")


def test_summarize_reports_outage_lines(schema, hub):
    hub.clients["wikidata"].down = True
    uri = "https://mathalgodb.example.org/id/p-saddle"
    spec = SearchSpec(target="algorithm", filters=[uses("AlgorithmicProblem", uri)], limit=10)
    summary = summarize_results(execute_search(spec, hub, schema))
    lines = summary.splitlines()
    assert lines[0] == "2 result(s)"
    assert "[wikidata] unavailable: source wikidata unavailable" in lines


# ------------------------------------------------- randomized differentials


def test_random_specs_build_parse_and_match_join_oracle(schema):
    rng = random.Random(911)
    parse_failures = 0
    for case in range(300):
        spec = random_search_spec(rng, schema)
        text = build_search(spec, schema)
        assert build_search(spec, schema) == text
        try:
            query = parse_query(text)
        except ParseError:
            parse_failures += 1
            continue
        store = random_store(rng, schema)
        got = evaluate_select(store, query)
        want = join_oracle(store, query)
        assert tables_equal(got, want), f"case {case} diverged from the join oracle"
    assert parse_failures == 0
