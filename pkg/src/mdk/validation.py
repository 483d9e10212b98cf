"""Completeness and connectedness checks for documentation sessions.

A session passes when every required relation whose domain and range both
belong to the session's catalog is satisfied, every link lands on a
registered item of the right class, and the inter-class link graph forms a
single connected component. Within-class relations (generalizes and friends)
never affect the verdict; publication items attach through the shared
publication section and are exempt from connectivity.

Warnings (self-relations, undescribed stub items) inform without failing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import FormMismatch
from .interview import DOCUMENTATION_CATALOGS, QuestionnaireSession
from .schema import CatalogSchema

ERROR = "error"
WARNING = "warning"

PUBLICATION_CLASS = "Publication"


@dataclass
class Violation:
    item_key: str
    kind: str  # missing-required-relation | dangling-link | class-mismatch | disconnected-component | empty-documentation | self-relation | stub-item
    detail: str
    severity: str = ERROR

    def to_json(self):
        return {"itemKey": self.item_key, "kind": self.kind, "detail": self.detail, "severity": self.severity}

    def sort_key(self):
        return (self.kind, self.item_key, self.detail)


@dataclass
class ValidationReport:
    session_id: str
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(v.severity == ERROR for v in self.violations)

    def errors(self):
        return [v for v in self.violations if v.severity == ERROR]

    def warnings(self):
        return [v for v in self.violations if v.severity == WARNING]

    def to_json(self):
        return {
            "sessionId": self.session_id,
            "passed": self.passed,
            "violations": [v.to_json() for v in sorted(self.violations, key=Violation.sort_key)],
        }


class _DisjointSet:
    def __init__(self, keys):
        self.parent = {k: k for k in keys}

    def find(self, k):
        while self.parent[k] != k:
            self.parent[k] = self.parent[self.parent[k]]
            k = self.parent[k]
        return k

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def enforced_required(schema: CatalogSchema, catalog_id: str, class_name: str):
    """Required relations checked for this class inside this catalog: both
    ends must be catalog members, otherwise the page layout cannot supply a
    target and the requirement is out of scope for the session."""
    out = []
    for rel in schema.relations_from(class_name):
        if not rel.required_for_completeness:
            continue
        if schema.is_member(rel.domain_class, catalog_id) and schema.is_member(rel.range_class, catalog_id):
            out.append(rel)
    return out


def validate_session(session: QuestionnaireSession, schema: CatalogSchema | None = None) -> ValidationReport:
    schema = schema or session.schema
    if session.catalog_id not in DOCUMENTATION_CATALOGS:
        raise FormMismatch(f"catalog {session.catalog_id!r} sessions are not validated")
    report = ValidationReport(session_id=session.session_id)
    items = {key: session.registry.get(key) for key in session.registry.items}
    if not items:
        report.violations.append(Violation("", "empty-documentation", "session documents nothing", ERROR))
        return report

    for key, item in items.items():
        for rel_name, targets in item.relations.items():
            rel = schema.relation_for(rel_name, item.class_name)
            for target_key in targets:
                if target_key not in items:
                    report.violations.append(
                        Violation(key, "dangling-link", f"{rel_name} -> {target_key} (no such item)", ERROR)
                    )
                    continue
                target = items[target_key]
                if rel is not None and target.class_name != rel.range_class:
                    report.violations.append(
                        Violation(
                            key,
                            "class-mismatch",
                            f"{rel_name} -> {target_key} is {target.class_name}, needs {rel.range_class}",
                            ERROR,
                        )
                    )
                if target_key == key:
                    report.violations.append(Violation(key, "self-relation", rel_name, WARNING))

    for key, item in items.items():
        if not schema.is_member(item.class_name, session.catalog_id):
            continue
        for rel in enforced_required(schema, session.catalog_id, item.class_name):
            linked = [t for t in item.relations.get(rel.name, []) if t in items]
            if not linked:
                report.violations.append(
                    Violation(key, "missing-required-relation", f"{rel.name} ({rel.range_class})", ERROR)
                )

    connectable = [k for k, it in items.items() if it.class_name != PUBLICATION_CLASS]
    if len(connectable) > 1:
        ds = _DisjointSet(connectable)
        for key, item in items.items():
            if item.class_name == PUBLICATION_CLASS:
                continue
            for rel_name, targets in item.relations.items():
                rel = schema.relation_for(rel_name, item.class_name)
                if rel is not None and rel.intra_class:
                    continue  # within-class edges carry no connectivity
                for target_key in targets:
                    if target_key in items and items[target_key].class_name != PUBLICATION_CLASS and target_key != key:
                        ds.union(key, target_key)
        components: dict[str, list] = {}
        for key in connectable:
            components.setdefault(ds.find(key), []).append(key)
        if len(components) > 1:
            groups = sorted(components.values(), key=lambda g: (-len(g), min(g)))
            for extra in groups[1:]:
                members = sorted(extra)
                report.violations.append(
                    Violation(members[0], "disconnected-component", ", ".join(members), ERROR)
                )

    for key, item in items.items():
        if all(r.source == "user" for r in item.refs) and set(item.fields) <= {"name"}:
            report.violations.append(Violation(key, "stub-item", "no details beyond a name", WARNING))

    return report
