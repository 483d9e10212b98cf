"""Search without writing SPARQL by hand.

A search spec names a target kind (workflow, model, algorithm) plus a
conjunctive filter list; the builder turns it into one deterministic SELECT
over the shared vocabulary by walking relation paths from the target class
to each filter's class. The executor fans the query out to the chosen
sources, merges by entity URI (first source listed wins), and reports each
source's status instead of failing on the first outage.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

from .errors import AllSourcesUnavailable, InvalidFilter, QueryRejected, SourceUnavailable
from .registry import ENTITY_URI_BASES, EntityRef
from .schema import CatalogSchema
from .vocab import RDF_TYPE, RDFS_LABEL, SCHEMA_DESCRIPTION, relation_uri

TARGET_CLASSES = {
    "workflow": "Workflow",
    "model": "MathematicalModel",
    "algorithm": "Algorithm",
}

MAX_PATH_HOPS = 3

KEYWORD_FIELDS = ("label", "description")

# questionnaire field names that project onto a vocabulary predicate
KEYWORD_ALIASES = {"objective": "description"}


@dataclass
class SearchSpec:
    target: str
    filters: list = field(default_factory=list)
    sources: list = field(default_factory=list)
    limit: int = 25

    def to_json(self):
        return {
            "target": self.target,
            "filters": [dict(f) for f in self.filters],
            "sources": list(self.sources),
            "limit": self.limit,
        }

    @classmethod
    def from_json(cls, doc) -> "SearchSpec":
        return cls(
            target=doc.get("target", ""),
            filters=[dict(f) for f in doc.get("filters", [])],
            sources=list(doc.get("sources", [])),
            limit=int(doc.get("limit", 25)),
        )


def _relation_path(schema: CatalogSchema, start_class: str, goal_class: str):
    """Shortest chain of declared inter-class relations from start to goal,
    at most MAX_PATH_HOPS long. Breadth-first in declaration order, so equal
    specs always produce the same path."""
    if start_class == goal_class:
        return []
    queue = deque([(start_class, [])])
    seen = {start_class}
    while queue:
        cls, path = queue.popleft()
        if len(path) >= MAX_PATH_HOPS:
            continue
        for rel in schema.relations_from(cls):
            if rel.intra_class:
                continue
            nxt = rel.range_class
            if nxt == goal_class:
                return path + [rel]
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, path + [rel]))
    return None


def _regex_escape(text: str) -> str:
    # regex-escape the text, then string-escape the pattern for the query literal
    pattern = re.escape(text)
    return pattern.replace("\\", "\\\\").replace('"', '\\"')


def build_search(spec: SearchSpec, schema: CatalogSchema) -> str:
    """Render a search spec as a SELECT query. Raises InvalidFilter when a filter
    cannot be anchored: unknown target, unreachable entity class, unknown
    keyword field, or an empty pattern."""
    if spec.target not in TARGET_CLASSES:
        raise InvalidFilter(f"unknown search target {spec.target!r}; one of {', '.join(sorted(TARGET_CLASSES))}")
    if not spec.filters:
        raise InvalidFilter("search needs at least one filter")
    if spec.limit < 1:
        raise InvalidFilter("limit must be positive")
    target_class = TARGET_CLASSES[spec.target]
    class_uri = schema.class_def(target_class).uri

    patterns = [
        f"  ?entity <{RDF_TYPE}> <{class_uri}> .",
        f"  ?entity <{RDFS_LABEL}> ?label .",
        f"  ?entity <{SCHEMA_DESCRIPTION}> ?description .",
    ]
    filters = []
    var_counter = 0

    def fresh_var():
        nonlocal var_counter
        var_counter += 1
        return f"?x{var_counter}"

    def walk(goal_class: str, reason: str) -> str:
        """Emit path patterns from ?entity to a var bound to goal_class."""
        path = _relation_path(schema, target_class, goal_class)
        if path is None:
            raise InvalidFilter(f"no relation path from {target_class} to {goal_class} within {MAX_PATH_HOPS} hops ({reason})")
        subject = "?entity"
        for rel in path:
            obj = fresh_var()
            patterns.append(f"  {subject} <{relation_uri(schema, rel.name)}> {obj} .")
            subject = obj
        return subject

    for f in spec.filters:
        kind = f.get("kind")
        if kind == "uses-entity":
            class_name = f.get("class", "")
            if not schema.has_class(class_name):
                raise InvalidFilter(f"uses-entity filter names unknown class {class_name!r}")
            ref = f.get("ref") or {}
            uri = ref.get("uri") or ""
            if not uri:
                raise InvalidFilter("uses-entity filter needs a ref with a uri")
            if class_name == target_class:
                raise InvalidFilter(f"uses-entity filter cannot target the searched class {class_name!r}")
            path = _relation_path(schema, target_class, class_name)
            if path is None:
                raise InvalidFilter(
                    f"no relation path from {target_class} to {class_name} within {MAX_PATH_HOPS} hops"
                )
            subject = "?entity"
            for i, rel in enumerate(path):
                obj = f"<{uri}>" if i == len(path) - 1 else fresh_var()
                patterns.append(f"  {subject} <{relation_uri(schema, rel.name)}> {obj} .")
                subject = obj
        elif kind == "keyword":
            text = f.get("text", "")
            if not text:
                raise InvalidFilter("keyword filter needs a non-empty text")
            field_name = f.get("field", "label")
            field_name = KEYWORD_ALIASES.get(field_name, field_name)
            if "." in field_name:
                class_name, _, attr = field_name.partition(".")
                attr = KEYWORD_ALIASES.get(attr, attr)
                if not schema.has_class(class_name):
                    raise InvalidFilter(f"keyword filter names unknown class {class_name!r}")
                if attr not in KEYWORD_FIELDS:
                    raise InvalidFilter(f"keyword filter field must be one of {', '.join(KEYWORD_FIELDS)}, not {attr!r}")
                hop_var = walk(class_name, f"keyword filter {field_name!r}")
                text_var = fresh_var()
                predicate = RDFS_LABEL if attr == "label" else SCHEMA_DESCRIPTION
                patterns.append(f"  {hop_var} <{predicate}> {text_var} .")
                filters.append(f'  FILTER regex({text_var}, "{_regex_escape(text)}", "i")')
            elif field_name in KEYWORD_FIELDS:
                var = "?label" if field_name == "label" else "?description"
                filters.append(f'  FILTER regex({var}, "{_regex_escape(text)}", "i")')
            else:
                raise InvalidFilter(f"keyword filter field must be one of {', '.join(KEYWORD_FIELDS)}, not {field_name!r}")
        else:
            raise InvalidFilter(f"unknown filter kind {kind!r}")

    lines = ["SELECT ?entity ?label ?description WHERE {"]
    lines.extend(patterns)
    lines.extend(filters)
    lines.append("}")
    lines.append(f"LIMIT {spec.limit}")
    return "\n".join(lines) + "\n"


@dataclass
class SearchResults:
    query_text: str
    rows: list = field(default_factory=list)  # {"ref": EntityRef, "matchedFilters": [...]}
    per_source_status: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "queryText": self.query_text,
            "rows": [{"ref": r["ref"].to_json(), "matchedFilters": list(r["matchedFilters"])} for r in self.rows],
            "perSourceStatus": dict(self.per_source_status),
        }


def _filter_labels(spec: SearchSpec) -> list:
    labels = []
    for f in spec.filters:
        if f.get("kind") == "uses-entity":
            ref = f.get("ref") or {}
            labels.append(f"uses {f.get('class')}: {ref.get('label') or ref.get('uri', '')}")
        else:
            labels.append(f"keyword {f.get('field', 'label')}: {f.get('text', '')}")
    return labels


def _local_id_from_uri(source: str, uri: str) -> str:
    base = ENTITY_URI_BASES.get(source, "")
    if base and uri.startswith(base):
        return uri[len(base):]
    return uri.rsplit("/", 1)[-1]


def execute_search(spec: SearchSpec, hub, schema: CatalogSchema) -> SearchResults:
    """Run the built query against every requested source. Rows are merged
    by entity URI with the earliest-listed source winning; a source outage
    degrades to a status entry unless every source is out."""
    query = build_search(spec, schema)
    sources = list(spec.sources) or list(schema.class_def(TARGET_CLASSES[spec.target]).source_priority)
    results = SearchResults(query_text=query)
    labels = _filter_labels(spec)
    seen_uris = set()
    ok_count = 0
    for source_id in sources:
        try:
            table = hub.sparql_select(source_id, query)
        except (SourceUnavailable, QueryRejected) as exc:
            results.per_source_status[source_id] = f"unavailable: {exc}"
            continue
        results.per_source_status[source_id] = "ok"
        ok_count += 1
        for row in table.rows:
            uri = _cell(row, "entity")
            if not uri or uri in seen_uris:
                continue
            seen_uris.add(uri)
            ref = EntityRef(
                source=source_id,
                local_id=_local_id_from_uri(source_id, uri),
                label=_cell(row, "label"),
                description=_cell(row, "description"),
                uri=uri,
            )
            results.rows.append({"ref": ref, "matchedFilters": list(labels)})
    if ok_count == 0:
        raise AllSourcesUnavailable(
            f"all sources unavailable: {', '.join(sources)}",
            detail=dict(results.per_source_status),
        )
    return results


def _cell(row, name):
    term = row.get(name)
    if term is None:
        return ""
    return getattr(term, "value", None) or getattr(term, "text", "")


def summarize_results(results: SearchResults) -> str:
    """Human-readable result sheet: hits grouped by source, then the exact
    query that produced them."""
    lines = [f"{len(results.rows)} result(s)"]
    by_source: dict[str, list] = {}
    for row in results.rows:
        by_source.setdefault(row["ref"].source, []).append(row)
    for source_id in results.per_source_status:
        status = results.per_source_status[source_id]
        rows = by_source.get(source_id, [])
        lines.append("")
        lines.append(f"[{source_id}] {status}" if status != "ok" else f"[{source_id}] {len(rows)} hit(s)")
        for row in rows:
            ref = row["ref"]
            lines.append(f"  - {ref.label}")
            if ref.description:
                lines.append(f"    {ref.description}")
            lines.append(f"    {ref.uri}")
    lines.append("")
    lines.append("query:")
    lines.extend("  " + q for q in results.query_text.rstrip("\n").split("\n"))
    return "\n".join(lines) + "\n"
