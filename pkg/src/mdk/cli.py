"""Command-line interface.

Every subcommand drives the same engine functions as the HTTP service, so a
session file produced here is byte-identical to what the service stores for
the same operations. Exit codes: 0 success, 1 domain failure (engine error
or failed validation), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import exporter, interview
from .errors import MdkError, PartialExport
from .registry import EntityRef
from .schema import CatalogSchema, default_schema, load_schema
from .search import SearchSpec, execute_search, summarize_results
from .sources import SourceHub
from .tripledesk import TripleStore, parse_query, run_query
from .validation import validate_session


def _schema_from(args) -> CatalogSchema:
    path = getattr(args, "schema", "") or os.environ.get("MDK_SCHEMA", "")
    if path:
        return load_schema(Path(path).read_text(encoding="utf-8"))
    return default_schema()


def _print_json(doc):
    print(json.dumps(doc, indent=2, ensure_ascii=False))


def _load_session(args, schema):
    text = Path(args.session).read_text(encoding="utf-8")
    return interview.deserialize_session(text, schema)


def _save_session(session, path: str):
    Path(path).write_text(interview.serialize_session(session), encoding="utf-8")


# ---------------------------------------------------------------------------
# interview


def _apply_action(session, action: dict, hub):
    kind = action.get("action", "")
    if kind == "select":
        if action.get("ref"):
            choice = EntityRef.from_json(action["ref"])
        else:
            choice = str(action.get("label", ""))
        return interview.answer_select(session, action.get("page", ""), choice, hub)
    if kind == "set-field":
        return interview.set_field(session, action.get("key", ""), action.get("field", ""), action.get("value"))
    if kind == "link":
        return interview.link_items(session, action.get("fromKey", ""), action.get("relation", ""), action.get("toKey", ""))
    if kind == "intra":
        return interview.set_intra_relation(
            session, action.get("fromKey", ""), action.get("relation", ""), action.get("toKey", "")
        )
    if kind == "publication":
        subject = action.get("doi") or action.get("url") or ""
        if action.get("ref"):
            subject = EntityRef.from_json(action["ref"])
        record = interview.add_publication(session, subject, action.get("linkedItemKeys", []), hub)
        return record.to_json()
    if kind == "search-spec":
        return interview.set_search_spec(session, action.get("spec", {}))
    raise MdkError(f"unknown action {kind!r}")


def _interactive_loop(session, hub, schema):
    catalog = schema.catalog(session.catalog_id)
    print(f"documenting catalog {catalog.id!r}; empty answer skips a page, 'm NAME' enters a manual item")
    for page in catalog.pages:
        if page.class_name is None:
            continue
        prompt = f"[{page.title}] search ({page.class_name}): "
        try:
            answer = input(prompt).strip()
        except EOFError:
            break
        if not answer:
            continue
        if answer.startswith("m "):
            report = interview.answer_select(session, page.id, answer[2:].strip(), hub)
            print(f"  added {report['key']}")
            continue
        groups = hub.autocomplete(answer, page.class_name)
        flat = [(g["source"], r) for g in groups for r in g["refs"]]
        if not flat:
            print("  no matches")
            continue
        for i, (source_id, ref) in enumerate(flat, start=1):
            line = f"  {i}. {ref.label} [{source_id}]"
            if ref.description:
                line += f" - {ref.description}"
            print(line)
        pick = input("  pick number (empty to skip): ").strip()
        if not pick.isdigit() or not 1 <= int(pick) <= len(flat):
            continue
        report = interview.answer_select(session, page.id, flat[int(pick) - 1][1], hub)
        print(f"  added {report['key']}")
        for inserted in report.get("insertedItems", []):
            print(f"    auto: {inserted['key']} {inserted['label']} ({inserted['class']})")


def cmd_interview(args) -> int:
    schema = _schema_from(args)
    hub = SourceHub(schema)
    if args.load:
        session = _load_session(argparse.Namespace(session=args.load), schema)
    else:
        if not args.catalog:
            print("either --load or --catalog is required", file=sys.stderr)
            return 2
        session = interview.start_session(args.catalog, schema, session_id=args.session_id or None)

    reports = []
    if args.actions:
        actions = json.loads(Path(args.actions).read_text(encoding="utf-8"))
        for action in actions:
            reports.append(_apply_action(session, action, hub))
    elif not sys.stdin.isatty():
        text = sys.stdin.read().strip()
        if text:
            for action in json.loads(text):
                reports.append(_apply_action(session, action, hub))
    else:
        _interactive_loop(session, hub, schema)

    save_path = args.save or args.load
    if save_path:
        _save_session(session, save_path)
    if args.json:
        _print_json({"sessionId": session.session_id, "reports": reports})
    else:
        print(f"session {session.session_id}: {len(session.registry.items)} item(s)")
        if save_path:
            print(f"saved to {save_path}")
    return 0


# ---------------------------------------------------------------------------
# validate / preview


def cmd_validate(args) -> int:
    schema = _schema_from(args)
    session = _load_session(args, schema)
    report = validate_session(session, schema)
    if args.json:
        _print_json(report.to_json())
    else:
        print(f"session {session.session_id}: {'PASS' if report.passed else 'FAIL'}")
        for v in sorted(report.violations, key=lambda v: v.sort_key()):
            print(f"  {v.severity}: {v.kind} {v.item_key} {v.detail}")
    return 0 if report.passed else 1


def cmd_preview(args) -> int:
    schema = _schema_from(args)
    session = _load_session(args, schema)
    doc = exporter.build_preview(session, schema)
    if args.save or args.load_save:
        _save_session(session, args.save or args.session)
    if args.json:
        _print_json(doc)
        return 0
    if doc["kind"] == "search":
        print(doc["queryText"], end="")
        return 0
    for section in doc["sections"]:
        if not section["items"]:
            continue
        print(f"== {section['title']}")
        for item in section["items"]:
            print(f"  {item['key']} {item['label']} ({item['class']})")
            for f in item["fields"]:
                print(f"    {f['name']}: {f['value']}  [{f['provenance']}]")
            for rel in item["relations"]:
                targets = ", ".join(t["label"] for t in rel["targets"])
                print(f"    {rel['relation']} -> {targets}")
    if doc["publications"]:
        print("== Publications")
        for pub in doc["publications"]:
            linked = ", ".join(t["key"] for t in pub["linkedItems"])
            print(f"  {pub['citation']}" + (f"  [{linked}]" if linked else ""))
    return 0


# ---------------------------------------------------------------------------
# export


def _fixture_wikibase_from_file(source_id: str, path: Path, expected_token: str):
    sink = exporter.FixtureWikibaseSink(source_id, expected_token=expected_token)
    if path.exists():
        doc = json.loads(path.read_text(encoding="utf-8"))
        sink.entities = doc.get("entities", {})
        sink._next = int(doc.get("next", sink._next))
    return sink


def _fixture_wikibase_save(sink, path: Path):
    path.write_text(
        json.dumps({"next": sink._next, "entities": sink.entities}, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def cmd_export(args) -> int:
    schema = _schema_from(args)
    session = _load_session(args, schema)
    sink = {"type": args.sink_type, "source": args.sink_source}
    plan = exporter.plan_export(session, sink, schema)

    if args.dry_run:
        if args.sink_type == exporter.SINK_SPARQL:
            for query in exporter.render_insert_queries(plan):
                print(query, end="")
        else:
            _print_json(plan.to_json())
        return 0

    token = args.token or os.environ.get("MDK_OAUTH_TOKEN", "")
    if args.sink_type == exporter.SINK_SPARQL:
        store_path = Path(args.store_file or f"mdk-{args.sink_source}.nt")
        store = TripleStore.load(store_path.read_text(encoding="utf-8")) if store_path.exists() else TripleStore()
        client = exporter.EmbeddedStoreSink(store, args.sink_source)
        credentials = None
    else:
        if args.sink_url:
            client = exporter.WikibaseHttpSink(args.sink_source, args.sink_url)
        else:
            state_path = Path(args.sink_state or f"mdk-{args.sink_source}-wikibase.json")
            expected = os.environ.get("MDK_SINK_TOKEN", "") or "fixture-token"
            client = _fixture_wikibase_from_file(args.sink_source, state_path, expected)
        credentials = token or "fixture-token"

    try:
        receipt = exporter.execute_export(plan, credentials, client)
    except PartialExport as exc:
        _print_json({"error": {"code": exc.code, "receipt": exc.receipt, "resume": exc.resume}})
        return 1
    interview.record_export(session, plan.sink, receipt)
    exporter.writeback_pids(session, receipt, schema)
    _save_session(session, args.session)

    if args.sink_type == exporter.SINK_SPARQL:
        store_path.write_text(client.store.dump(), encoding="utf-8")
    elif not args.sink_url:
        _fixture_wikibase_save(client, state_path)
    if args.receipt:
        Path(args.receipt).write_text(json.dumps(receipt, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    if args.json:
        _print_json(receipt)
    else:
        print(f"exported {receipt['opCount']} op(s) to {args.sink_source}")
        for entry in receipt["landing"]:
            print(f"  {entry['label']}: {entry['link']}")
    return 0


# ---------------------------------------------------------------------------
# search


def _parse_filters(args):
    filters = []
    for chunk in args.uses or []:
        class_name, sep, uri = chunk.partition("=")
        if not sep or not uri:
            raise MdkError(f"--uses expects Class=<uri>, got {chunk!r}")
        filters.append({"kind": "uses-entity", "class": class_name, "ref": {"uri": uri}})
    for chunk in args.keyword or []:
        field, sep, text = chunk.partition("=")
        if sep and field and not field.isspace():
            filters.append({"kind": "keyword", "field": field, "text": text})
        else:
            filters.append({"kind": "keyword", "field": "label", "text": chunk})
    return filters


def cmd_search(args) -> int:
    schema = _schema_from(args)
    hub = SourceHub(schema)
    spec = SearchSpec(
        target=args.target,
        filters=_parse_filters(args),
        sources=args.source or [],
        limit=args.limit,
    )
    results = execute_search(spec, hub, schema)
    if args.json:
        _print_json(results.to_json())
    else:
        print(summarize_results(results), end="")
    return 0


# ---------------------------------------------------------------------------
# store


def cmd_store(args) -> int:
    store = TripleStore()
    if args.load:
        store = TripleStore.load(Path(args.load).read_text(encoding="utf-8"))
    if args.query:
        text = Path(args.query).read_text(encoding="utf-8")
    elif args.query_text:
        text = args.query_text
    else:
        print("either --query or --query-text is required", file=sys.stderr)
        return 2
    ast = parse_query(text)
    result = run_query(store, text)
    if ast.form == "insert-data":
        if args.save or args.load:
            Path(args.save or args.load).write_text(store.dump(), encoding="utf-8")
        print(f"inserted {result} novel triple(s); store holds {len(store.snapshot())}")
        return 0
    if args.json:
        _print_json(result.to_json())
    else:
        print("\t".join(result.columns))
        for row in result.rows:
            cells = []
            for c in result.columns:
                term = row.get(c)
                cells.append("" if term is None else getattr(term, "value", None) or getattr(term, "text", ""))
            print("\t".join(cells))
    return 0


# ---------------------------------------------------------------------------
# autocomplete / serve


def cmd_autocomplete(args) -> int:
    schema = _schema_from(args)
    hub = SourceHub(schema)
    groups = hub.autocomplete(args.q, getattr(args, "class"), limit=args.limit)
    if args.json:
        _print_json(
            {
                "groups": [
                    {"source": g["source"], "status": g["status"], "refs": [r.to_json() for r in g["refs"]]}
                    for g in groups
                ]
            }
        )
    else:
        for g in groups:
            print(f"[{g['source']}] {g['status']}")
            for ref in g["refs"]:
                print(f"  {ref.label}" + (f" - {ref.description}" if ref.description else ""))
    return 0


def cmd_serve(args) -> int:
    from .api import serve

    serve(bind=args.bind, static_dir=args.static or None)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdk", description="documentation and search for mathematical research data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interview", help="create or extend a documentation session")
    p.add_argument("--catalog", default="", help="catalog id for a new session")
    p.add_argument("--session-id", default="", help="explicit session id for a new session")
    p.add_argument("--load", default="", help="existing session file")
    p.add_argument("--save", default="", help="where to write the session (defaults to --load)")
    p.add_argument("--actions", default="", help="JSON file with scripted actions")
    p.add_argument("--schema", default="")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_interview)

    p = sub.add_parser("validate", help="check completeness and connectedness")
    p.add_argument("--session", required=True)
    p.add_argument("--schema", default="")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("preview", help="render the session for review")
    p.add_argument("--session", required=True)
    p.add_argument("--save", default="", help="write the session back (citation cache)")
    p.add_argument("--load-save", action="store_true", help="write the session back to --session")
    p.add_argument("--schema", default="")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_preview)

    p = sub.add_parser("export", help="publish the session to a sink")
    p.add_argument("--session", required=True)
    p.add_argument("--sink-type", default=exporter.SINK_SPARQL, choices=list(exporter.SINK_TYPES))
    p.add_argument("--sink-source", required=True, help="source id the sink belongs to")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--store-file", default="", help="triple store file for sparql-insert sinks")
    p.add_argument("--sink-url", default="", help="live wikibase endpoint")
    p.add_argument("--sink-state", default="", help="state file for the bundled wikibase stand-in")
    p.add_argument("--token", default="", help="bearer token (default MDK_OAUTH_TOKEN)")
    p.add_argument("--receipt", default="", help="write the receipt JSON here")
    p.add_argument("--schema", default="")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("search", help="find documented entities across sources")
    p.add_argument("--target", required=True, choices=["workflow", "model", "algorithm"])
    p.add_argument("--uses", action="append", help="uses-entity filter, Class=<uri>")
    p.add_argument("--keyword", action="append", help="keyword filter, [field=]text")
    p.add_argument("--source", action="append", help="source id (repeatable, ordered)")
    p.add_argument("--limit", type=int, default=25)
    p.add_argument("--schema", default="")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("store", help="run a query against a triple store file")
    p.add_argument("--load", default="", help="N-Triples file")
    p.add_argument("--save", default="", help="write the store back after INSERT")
    p.add_argument("--query", default="", help="query file")
    p.add_argument("--query-text", default="", help="inline query text")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_store)

    p = sub.add_parser("autocomplete", help="source-backed label completion")
    p.add_argument("--q", required=True)
    p.add_argument("--class", required=True, dest="class")
    p.add_argument("--limit", type=int, default=10)
    p.add_argument("--schema", default="")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_autocomplete)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--bind", default="", help="host:port (default MDK_BIND or 127.0.0.1:8080)")
    p.add_argument("--static", default="", help="directory with the web client build")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except MdkError as exc:
        body = {"error": {"code": exc.code, "message": exc.message}}
        if exc.detail is not None:
            body["error"]["detail"] = exc.detail
        print(json.dumps(body, indent=2, ensure_ascii=False), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"no such file: {exc.filename}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
