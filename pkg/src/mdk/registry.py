"""Item registry: documented entities with multi-source identity.

An Item is one documented thing (a model, an algorithm, a processing step)
carrying an ordered list of source-qualified references, class-specific
fields, typed relations to other items, and per-value provenance.  The
registry owns key assignment and duplicate detection; priority resolution
(verifying a selection against higher-priority sources) lives here too since
it is an identity concern, not a transport one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SchemaMismatch, SourceUnavailable, UnknownClass
from .schema import CatalogSchema

USER_SOURCE = "user"

PROV_USER = "user-entered"


def prov_auto(source_id: str) -> str:
    return f"auto-filled:{source_id}"


# Resolvable entity uri bases per well-known source; extras fall back to a
# urn scheme so refs stay unique without per-source configuration.
ENTITY_URI_BASES = {
    "mathmoddb": "https://mathmoddb.example.org/id/",
    "mathalgodb": "https://mathalgodb.example.org/id/",
    "mardi-portal": "https://portal.example.org/entity/",
    "wikidata": "http://www.wikidata.org/entity/",
}


def entity_uri(source: str, local_id: str) -> str:
    if source == USER_SOURCE or not local_id:
        return ""
    base = ENTITY_URI_BASES.get(source)
    if base:
        return base + local_id
    return f"urn:mdk:{source}:{local_id}"


@dataclass(frozen=True)
class EntityRef:
    source: str
    local_id: str
    label: str
    description: str = ""
    uri: str = ""

    def __post_init__(self):
        if self.source != USER_SOURCE and not self.local_id:
            raise ValueError("localId required for non-user refs")
        if not self.uri:
            object.__setattr__(self, "uri", entity_uri(self.source, self.local_id))

    def to_json(self):
        return {
            "source": self.source,
            "localId": self.local_id,
            "label": self.label,
            "description": self.description,
            "uri": self.uri,
        }

    @classmethod
    def from_json(cls, doc) -> "EntityRef":
        return cls(
            source=doc["source"],
            local_id=doc.get("localId", ""),
            label=doc.get("label", ""),
            description=doc.get("description", ""),
            uri=doc.get("uri", ""),
        )


def user_ref(label: str) -> EntityRef:
    return EntityRef(source=USER_SOURCE, local_id="", label=label)


@dataclass
class Item:
    key: str
    class_name: str
    refs: list[EntityRef]
    fields: dict = field(default_factory=dict)
    relations: dict = field(default_factory=dict)  # relation name -> ordered ItemKeys
    provenance: dict = field(default_factory=dict)  # field/relation name -> provenance tag

    @property
    def top_ref(self) -> EntityRef:
        return self.refs[0]

    @property
    def label(self) -> str:
        return self.refs[0].label

    def is_external(self) -> bool:
        return any(r.source != USER_SOURCE for r in self.refs)

    def external_uri(self, source: str) -> str | None:
        for r in self.refs:
            if r.source == source and r.uri:
                return r.uri
        return None

    def to_json(self):
        return {
            "key": self.key,
            "class": self.class_name,
            "refs": [r.to_json() for r in self.refs],
            "fields": dict(self.fields),
            "relations": {k: list(v) for k, v in self.relations.items()},
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_json(cls, doc) -> "Item":
        return cls(
            key=doc["key"],
            class_name=doc["class"],
            refs=[EntityRef.from_json(r) for r in doc["refs"]],
            fields=dict(doc.get("fields", {})),
            relations={k: list(v) for k, v in doc.get("relations", {}).items()},
            provenance=dict(doc.get("provenance", {})),
        )


class ItemRegistry:
    """Session-scoped item store. Single writer; keys are sequential and
    deterministic so replayed sessions assign identical keys."""

    def __init__(self, schema: CatalogSchema):
        self.schema = schema
        self.items: dict[str, Item] = {}
        self._counter = 0

    def __len__(self):
        return len(self.items)

    def __contains__(self, key):
        return key in self.items

    def get(self, key: str) -> Item:
        return self.items[key]

    def next_key(self) -> str:
        self._counter += 1
        return f"i{self._counter:04d}"

    def _identity(self, class_name: str, top: EntityRef):
        if top.source == USER_SOURCE:
            return (class_name, USER_SOURCE, top.label.lower())
        return (class_name, top.source, top.local_id)

    def register_item(self, item: Item) -> str:
        """Store the item under a fresh key, or return the existing key when
        an item of the same class already carries the same top reference."""
        if not self.schema.has_class(item.class_name):
            raise SchemaMismatch(f"undeclared entity class {item.class_name!r}")
        if not item.refs:
            raise SchemaMismatch("item has no refs")
        class_def = self.schema.class_def(item.class_name)
        declared_fields = {f.name for f in class_def.info_box_fields}
        for name in item.fields:
            if name not in declared_fields:
                raise SchemaMismatch(f"class {item.class_name!r} declares no field {name!r}")
        for rel_name in item.relations:
            if self.schema.relation_for(rel_name, item.class_name) is None:
                raise SchemaMismatch(f"no relation {rel_name!r} declared from {item.class_name!r}")
        identity = self._identity(item.class_name, item.top_ref)
        for existing in self.items.values():
            if self._identity(existing.class_name, existing.top_ref) == identity:
                return existing.key
        key = item.key or self.next_key()
        item.key = key
        self.items[key] = item
        return key

    def find_by_label(self, class_name: str, label: str) -> str | None:
        if not self.schema.has_class(class_name):
            raise UnknownClass(f"unknown entity class {class_name!r}")
        needle = label.lower()
        for key, item in self.items.items():
            if item.class_name == class_name and item.label.lower() == needle:
                return key
        return None

    def find_by_ref(self, class_name: str, source: str, local_id: str) -> str | None:
        """First item of the class carrying (source, local_id) anywhere in its
        ref list; registration order breaks ties."""
        for key, item in self.items.items():
            if item.class_name != class_name:
                continue
            for ref in item.refs:
                if ref.source == source and ref.local_id == local_id:
                    return key
        return None

    def of_class(self, class_name: str) -> list[Item]:
        return [i for i in self.items.values() if i.class_name == class_name]


def source_rank(class_def, source: str) -> int:
    """Position in the class's priority list; `user` ranks below everything."""
    if source == USER_SOURCE:
        return len(class_def.source_priority)
    try:
        return class_def.source_priority.index(source)
    except ValueError:
        return len(class_def.source_priority)


def resolve_to_preferred(ref: EntityRef, class_name: str, hub, schema: CatalogSchema):
    """Check whether the selected entity exists in a higher-priority source.

    Queries every source strictly above ref.source in the class's priority
    order. An explicit cross-reference link wins over case-insensitive label
    equality. Returns (best ref, trail); source failures degrade to the input
    ref with the failure recorded, never an exception.
    """
    class_def = schema.class_def(class_name)
    if ref.source != USER_SOURCE and ref.source not in class_def.source_priority:
        raise SchemaMismatch(f"source {ref.source!r} is not configured for class {class_name!r}")
    rank = source_rank(class_def, ref.source)
    higher = class_def.source_priority[:rank]
    trail = []
    if not higher:
        return ref, trail

    own_doc = None
    if ref.source != USER_SOURCE:
        try:
            own_doc = hub.get_entity(ref.source, ref.local_id)
        except SourceUnavailable:
            own_doc = None
        except Exception:
            own_doc = None

    accepted = schema.search_classes(class_name)
    for source_id in higher:
        entry = {"source": source_id, "outcome": "miss", "via": None}
        try:
            match = None
            if own_doc is not None:
                linked = own_doc.cross_refs.get(source_id)
                if linked:
                    try:
                        doc = hub.get_entity(source_id, linked)
                        match = doc.as_ref()
                        entry["via"] = "cross-reference"
                    except Exception:
                        match = None
            if match is None:
                back = hub.get(source_id).find_by_cross_ref(ref.source, ref.local_id)
                if back is not None:
                    match = back
                    entry["via"] = "cross-reference"
            if match is None and ref.label:
                hits = hub.get(source_id).find_by_label(ref.label, accepted)
                if hits:
                    match = hits[0]
                    entry["via"] = "label"
            if match is not None:
                entry["outcome"] = "hit"
                trail.append(entry)
                return match, trail
            trail.append(entry)
        except SourceUnavailable:
            entry["outcome"] = "unavailable"
            trail.append(entry)
    return ref, trail
