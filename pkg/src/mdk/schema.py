"""Declarative catalog schema.

Entity classes, typed relations, automation rules, and catalog page layouts
are data, not code: every engine behavior (autocomplete class filters, source
priorities, downstream auto-insertion, completeness checks, export predicate
mappings) is driven by a schema document.  A bundled default document covers
the three documentation catalogs (model, algorithm, workflow) plus the search
catalog; deployments may load their own.

Schema documents are UTF-8 JSON with top-level keys ``schemaVersion``,
``classes``, ``relations``, ``automation``, ``catalogs``.  See
``data/default_schema.json`` for the reference shape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .errors import ParseError, SchemaError, UnknownCatalog, UnknownClass

VALUE_KINDS = ("text", "formula-latex", "symbol-list", "external-id", "uri")
CARDINALITIES = ("one", "many")

# Relation identity is (name, domainClass): the same relation name may be
# declared from several domain classes (e.g. containsFormulation from both
# ComputationalTask and MathematicalModel) and shares one predicate uri.


@dataclass(frozen=True)
class FieldDef:
    name: str
    kind: str
    required: bool = False


@dataclass(frozen=True)
class EntityClassDef:
    name: str
    label: str
    catalog_membership: tuple[str, ...]
    info_box_fields: tuple[FieldDef, ...]
    source_priority: tuple[str, ...]
    uri: str
    description: str = ""
    # entity classes whose instances may stand in for this class when
    # searching sources (e.g. Method accepts Algorithm: only methods
    # classified as algorithms belong to the algorithmic domain)
    accepts_classes: tuple[str, ...] = ()
    # per-source wikibase item ids used as instance-of targets by wikibase
    # sinks; sparql sinks use `uri` instead
    wikibase: tuple[tuple[str, str], ...] = ()

    def wikibase_id(self, source_id: str) -> str | None:
        for sid, qid in self.wikibase:
            if sid == source_id:
                return qid
        return None


@dataclass(frozen=True)
class RelationDef:
    name: str
    domain_class: str
    range_class: str
    uri: str
    intra_class: bool = False
    required_for_completeness: bool = False
    cardinality: str = "many"
    wikibase: tuple[tuple[str, str], ...] = ()

    def wikibase_id(self, source_id: str) -> str | None:
        for sid, pid in self.wikibase:
            if sid == source_id:
                return pid
        return None


@dataclass(frozen=True)
class AutomationRule:
    catalog_id: str
    trigger_class: str
    downstream_edges: tuple[tuple[str, str], ...]  # (relation name, target class)


@dataclass(frozen=True)
class PageDef:
    id: str
    title: str
    class_name: str | None = None  # filter pages of the search catalog carry no class


@dataclass(frozen=True)
class CatalogDef:
    id: str
    label: str
    pages: tuple[PageDef, ...]

    def page_classes(self) -> tuple[str, ...]:
        return tuple(p.class_name for p in self.pages if p.class_name)


@dataclass(frozen=True)
class CatalogSchema:
    schema_version: str
    classes: tuple[EntityClassDef, ...]
    relations: tuple[RelationDef, ...]
    automation_rules: tuple[AutomationRule, ...]
    catalogs: tuple[CatalogDef, ...]

    def __post_init__(self):
        object.__setattr__(self, "_class_by_name", {c.name: c for c in self.classes})
        object.__setattr__(self, "_catalog_by_id", {c.id: c for c in self.catalogs})
        rel_index: dict[tuple[str, str], RelationDef] = {}
        by_name: dict[str, list[RelationDef]] = {}
        for r in self.relations:
            rel_index[(r.name, r.domain_class)] = r
            by_name.setdefault(r.name, []).append(r)
        object.__setattr__(self, "_relation_index", rel_index)
        object.__setattr__(self, "_relations_by_name", by_name)

    def class_def(self, name: str) -> EntityClassDef:
        try:
            return self._class_by_name[name]
        except KeyError:
            raise UnknownClass(f"unknown entity class {name!r}") from None

    def has_class(self, name: str) -> bool:
        return name in self._class_by_name

    def catalog(self, catalog_id: str) -> CatalogDef:
        try:
            return self._catalog_by_id[catalog_id]
        except KeyError:
            raise UnknownCatalog(f"unknown catalog {catalog_id!r}") from None

    def relation_for(self, name: str, domain_class: str) -> RelationDef | None:
        return self._relation_index.get((name, domain_class))

    def relations_named(self, name: str) -> tuple[RelationDef, ...]:
        return tuple(self._relations_by_name.get(name, ()))

    def relations_from(self, class_name: str) -> tuple[RelationDef, ...]:
        return tuple(r for r in self.relations if r.domain_class == class_name)

    def automation_edges(self, catalog_id: str, class_name: str):
        """Declared (RelationDef, target class) edges triggered by class_name
        in the given catalog, in declaration order."""
        edges = []
        for rule in self.automation_rules:
            if rule.catalog_id != catalog_id or rule.trigger_class != class_name:
                continue
            for rel_name, target in rule.downstream_edges:
                edges.append((self._relation_index[(rel_name, class_name)], target))
        return edges

    def search_classes(self, class_name: str) -> tuple[str, ...]:
        """The class plus everything it accepts, for source-side filtering."""
        cd = self.class_def(class_name)
        return (class_name,) + cd.accepts_classes

    def is_member(self, class_name: str, catalog_id: str) -> bool:
        return catalog_id in self.class_def(class_name).catalog_membership


# ---------------------------------------------------------------------------
# Loading


def _require(cond: bool, message: str):
    if not cond:
        raise SchemaError(message)


def _str_field(obj: dict, key: str, where: str) -> str:
    value = obj.get(key)
    _require(isinstance(value, str) and value != "", f"{where}: {key!r} must be a non-empty string")
    return value


def _parse_wikibase(obj: dict, where: str) -> tuple[tuple[str, str], ...]:
    raw = obj.get("wikibase", {})
    _require(isinstance(raw, dict), f"{where}: 'wikibase' must be an object")
    return tuple(sorted((str(k), str(v)) for k, v in raw.items()))


def _parse_class(obj: dict) -> EntityClassDef:
    name = _str_field(obj, "name", "class")
    where = f"class {name!r}"
    membership = obj.get("catalogMembership")
    _require(isinstance(membership, list) and membership, f"{where}: catalogMembership must be a non-empty list")
    _require(len(set(membership)) == len(membership), f"{where}: duplicate catalogMembership entries")
    fields = []
    for fobj in obj.get("infoBoxFields", []):
        fname = _str_field(fobj, "name", f"{where} field")
        kind = fobj.get("kind", "text")
        _require(kind in VALUE_KINDS, f"{where} field {fname!r}: unknown value kind {kind!r}")
        fields.append(FieldDef(name=fname, kind=kind, required=bool(fobj.get("required", False))))
    _require(len({f.name for f in fields}) == len(fields), f"{where}: duplicate infoBoxFields")
    priority = obj.get("sourcePriority")
    _require(isinstance(priority, list) and priority, f"{where}: sourcePriority must be a non-empty list")
    _require(len(set(priority)) == len(priority), f"{where}: sourcePriority has duplicates")
    _require("user" not in priority, f"{where}: 'user' is implicit and may not appear in sourcePriority")
    return EntityClassDef(
        name=name,
        label=obj.get("label", name),
        description=obj.get("description", ""),
        catalog_membership=tuple(membership),
        info_box_fields=tuple(fields),
        source_priority=tuple(priority),
        uri=_str_field(obj, "uri", where),
        accepts_classes=tuple(obj.get("acceptsClasses", [])),
        wikibase=_parse_wikibase(obj, where),
    )


def _parse_relation(obj: dict) -> RelationDef:
    name = _str_field(obj, "name", "relation")
    where = f"relation {name!r}"
    rel = RelationDef(
        name=name,
        domain_class=_str_field(obj, "domainClass", where),
        range_class=_str_field(obj, "rangeClass", where),
        uri=_str_field(obj, "uri", where),
        intra_class=bool(obj.get("intraClass", False)),
        required_for_completeness=bool(obj.get("requiredForCompleteness", False)),
        cardinality=obj.get("cardinality", "many"),
        wikibase=_parse_wikibase(obj, where),
    )
    _require(rel.cardinality in CARDINALITIES, f"{where}: cardinality must be one of {CARDINALITIES}")
    _require(not rel.intra_class or rel.domain_class == rel.range_class, f"{where}: intraClass requires domainClass = rangeClass")
    _require(not (rel.intra_class and rel.required_for_completeness), f"{where}: intra-class relations are never required")
    return rel


def _check_automation_acyclic(catalog_id: str, edges: list[tuple[str, str]]):
    # Kahn's algorithm over the class-level automation graph of one catalog
    nodes = {n for e in edges for n in e}
    out: dict[str, set[str]] = {n: set() for n in nodes}
    indegree = {n: 0 for n in nodes}
    for src, dst in edges:
        if dst not in out[src]:
            out[src].add(dst)
            indegree[dst] += 1
    queue = sorted(n for n in nodes if indegree[n] == 0)
    seen = 0
    while queue:
        node = queue.pop(0)
        seen += 1
        for nxt in sorted(out[node]):
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    _require(seen == len(nodes), f"automation graph cyclic in catalog {catalog_id!r}")


def load_schema(document) -> CatalogSchema:
    """Build a CatalogSchema from a JSON string or an already-decoded dict.

    Raises ParseError on malformed JSON and SchemaError (naming the offending
    class, relation, rule, or catalog) on any invariant violation.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"schema document is not valid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    else:
        doc = document
    _require(isinstance(doc, dict), "schema document must be a JSON object")
    version = _str_field(doc, "schemaVersion", "document")

    classes = tuple(_parse_class(c) for c in doc.get("classes", []))
    _require(len(classes) > 0, "document declares no classes")
    names = [c.name for c in classes]
    _require(len(set(names)) == len(names), "duplicate class names")
    class_names = set(names)

    relations = tuple(_parse_relation(r) for r in doc.get("relations", []))
    seen_rel = set()
    for r in relations:
        key = (r.name, r.domain_class)
        _require(key not in seen_rel, f"relation {r.name!r} declared twice for domain {r.domain_class!r}")
        seen_rel.add(key)
        _require(r.domain_class in class_names, f"relation {r.name!r}: undeclared domainClass {r.domain_class!r}")
        _require(r.range_class in class_names, f"relation {r.name!r}: undeclared rangeClass {r.range_class!r}")

    catalogs = []
    for cobj in doc.get("catalogs", []):
        cid = _str_field(cobj, "id", "catalog")
        pages = []
        for pobj in cobj.get("pages", []):
            pid = _str_field(pobj, "id", f"catalog {cid!r} page")
            cls = pobj.get("class")
            if cls is not None:
                _require(cls in class_names, f"catalog {cid!r} page {pid!r}: undeclared class {cls!r}")
            pages.append(PageDef(id=pid, title=pobj.get("title", pid), class_name=cls))
        _require(len({p.id for p in pages}) == len(pages), f"catalog {cid!r}: duplicate page ids")
        catalogs.append(CatalogDef(id=cid, label=cobj.get("label", cid), pages=tuple(pages)))
    _require(len({c.id for c in catalogs}) == len(catalogs), "duplicate catalog ids")
    catalog_ids = {c.id for c in catalogs}

    for c in classes:
        for m in c.catalog_membership:
            _require(m in catalog_ids, f"class {c.name!r}: undeclared catalog {m!r} in catalogMembership")
        for a in c.accepts_classes:
            _require(a in class_names, f"class {c.name!r}: undeclared class {a!r} in acceptsClasses")

    membership = {c.name: set(c.catalog_membership) for c in classes}
    for cat in catalogs:
        for p in cat.pages:
            if p.class_name:
                _require(cat.id in membership[p.class_name], f"catalog {cat.id!r} page {p.id!r}: class {p.class_name!r} is not a member of this catalog")

    rel_index = {(r.name, r.domain_class): r for r in relations}
    rules = []
    for robj in doc.get("automation", []):
        cid = _str_field(robj, "catalog", "automation rule")
        _require(cid in catalog_ids, f"automation rule: undeclared catalog {cid!r}")
        trigger = _str_field(robj, "trigger", f"automation rule in {cid!r}")
        _require(trigger in class_names, f"automation rule: undeclared trigger class {trigger!r}")
        _require(cid in membership[trigger], f"automation rule: trigger {trigger!r} is not a member of catalog {cid!r}")
        edges = []
        for eobj in robj.get("edges", []):
            rel_name = _str_field(eobj, "relation", f"automation edge of {trigger!r}")
            target = _str_field(eobj, "target", f"automation edge of {trigger!r}")
            rel = rel_index.get((rel_name, trigger))
            _require(rel is not None, f"automation edge: no relation {rel_name!r} declared from {trigger!r}")
            _require(rel.range_class == target, f"automation edge: relation {rel_name!r} from {trigger!r} targets {rel.range_class!r}, not {target!r}")
            edges.append((rel_name, target))
        rules.append(AutomationRule(catalog_id=cid, trigger_class=trigger, downstream_edges=tuple(edges)))

    for cat in catalogs:
        class_edges = [(rule.trigger_class, target) for rule in rules if rule.catalog_id == cat.id for _, target in rule.downstream_edges]
        _check_automation_acyclic(cat.id, class_edges)

    # A required relation whose domain and range both belong to a catalog must
    # have its range on a page there, or no documentation could ever pass
    # validation in that catalog.
    for cat in catalogs:
        page_classes = set()
        for p in cat.pages:
            if p.class_name:
                page_classes.add(p.class_name)
        if not page_classes:
            continue
        for r in relations:
            if not r.required_for_completeness:
                continue
            if cat.id in membership[r.domain_class] and cat.id in membership[r.range_class]:
                _require(
                    r.range_class in page_classes,
                    f"catalog {cat.id!r}: required relation {r.name!r} targets {r.range_class!r} which appears on no page",
                )

    return CatalogSchema(
        schema_version=version,
        classes=classes,
        relations=relations,
        automation_rules=tuple(rules),
        catalogs=tuple(catalogs),
    )


def serialize_schema(schema: CatalogSchema) -> str:
    """Canonical JSON text; load_schema(serialize_schema(s)) == s."""
    doc = {
        "schemaVersion": schema.schema_version,
        "classes": [
            {
                "name": c.name,
                "label": c.label,
                "description": c.description,
                "catalogMembership": list(c.catalog_membership),
                "infoBoxFields": [{"name": f.name, "kind": f.kind, "required": f.required} for f in c.info_box_fields],
                "sourcePriority": list(c.source_priority),
                "uri": c.uri,
                "acceptsClasses": list(c.accepts_classes),
                "wikibase": {k: v for k, v in c.wikibase},
            }
            for c in schema.classes
        ],
        "relations": [
            {
                "name": r.name,
                "domainClass": r.domain_class,
                "rangeClass": r.range_class,
                "uri": r.uri,
                "intraClass": r.intra_class,
                "requiredForCompleteness": r.required_for_completeness,
                "cardinality": r.cardinality,
                "wikibase": {k: v for k, v in r.wikibase},
            }
            for r in schema.relations
        ],
        "automation": [
            {
                "catalog": rule.catalog_id,
                "trigger": rule.trigger_class,
                "edges": [{"relation": rel, "target": target} for rel, target in rule.downstream_edges],
            }
            for rule in schema.automation_rules
        ],
        "catalogs": [
            {
                "id": cat.id,
                "label": cat.label,
                "pages": [
                    {"id": p.id, "title": p.title, **({"class": p.class_name} if p.class_name else {})}
                    for p in cat.pages
                ],
            }
            for cat in schema.catalogs
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


_default: CatalogSchema | None = None


def default_schema() -> CatalogSchema:
    global _default
    if _default is None:
        text = resources.files("mdk").joinpath("data/default_schema.json").read_text(encoding="utf-8")
        _default = load_schema(text)
    return _default


# ---------------------------------------------------------------------------
# Queries


def downstream_closure(schema: CatalogSchema, catalog_id: str, class_name: str):
    """All (relation name, class name) automation edges reachable from
    class_name in the catalog, parents before children; deterministic.
    The trigger class itself never appears as a target (the graph is acyclic).
    """
    schema.catalog(catalog_id)
    if not schema.has_class(class_name):
        raise UnknownClass(f"unknown entity class {class_name!r}")
    if catalog_id not in schema.class_def(class_name).catalog_membership:
        raise UnknownClass(f"class {class_name!r} is not a member of catalog {catalog_id!r}")
    out = []
    seen_edges = set()
    visited = {class_name}
    queue = [class_name]
    while queue:
        current = queue.pop(0)
        for rel, target in schema.automation_edges(catalog_id, current):
            edge = (rel.name, target)
            if edge not in seen_edges:
                seen_edges.add(edge)
                out.append(edge)
            if target not in visited:
                visited.add(target)
                queue.append(target)
    return out


def required_relations(schema: CatalogSchema, class_name: str):
    """Relations from class_name with requiredForCompleteness, declaration
    order; intra-class relations can never appear (enforced at load)."""
    if not schema.has_class(class_name):
        raise UnknownClass(f"unknown entity class {class_name!r}")
    return [r for r in schema.relations if r.domain_class == class_name and r.required_for_completeness]
