"""Knowledge-source clients and the hub that federates them.

Four knowledge-graph sources (mathmoddb, mathalgodb, mardi-portal, wikidata)
back autocomplete, detail fetching, and priority resolution; five publication
sources (crossref, datacite, doi, zbmath, orcid) back the DOI cascade.  Each
source runs in one of two modes:

  fixture  -- desk-scale JSON mirror bundled with the package (the default),
              also the substrate for all tests
  live     -- HTTP client speaking the source's native protocol

Mode and endpoint come from ``MDK_SOURCE_<ID>_MODE`` / ``MDK_SOURCE_<ID>_URL``
(id uppercased, dashes to underscores). The hub records every consultation it
makes, which is what resolution trails and the cascade's instrumented order
are read from.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path

import requests

from . import tripledesk, vocab
from .errors import (
    ConfigError,
    InvalidDoi,
    MalformedId,
    NotFound,
    ParseError,
    QueryRejected,
    SchemaMismatch,
    SourceUnavailable,
)
from .registry import ENTITY_URI_BASES, EntityRef, entity_uri
from .schema import CatalogSchema
from .tripledesk import Literal, ResultTable, TripleStore, Uri, table_from_sparql_json

KG_SOURCES = ("mathmoddb", "mathalgodb", "mardi-portal", "wikidata")
# fixed consultation order of the DOI cascade: knowledge graphs first,
# then metadata APIs, orcid strictly last (enrichment only)
CASCADE_KG_ORDER = ("mathalgodb", "mathmoddb", "mardi-portal", "wikidata")
CASCADE_API_ORDER = ("crossref", "datacite", "doi", "zbmath")
ORCID_SOURCE = "orcid"
ALL_SOURCES = KG_SOURCES + CASCADE_API_ORDER + (ORCID_SOURCE,)

SOURCE_KINDS = {
    "mathmoddb": "sparql-endpoint",
    "mathalgodb": "sparql-endpoint",
    "mardi-portal": "wikibase-api",
    "wikidata": "wikibase-api",
    "crossref": "publication-api",
    "datacite": "publication-api",
    "doi": "publication-api",
    "zbmath": "publication-api",
    "orcid": "publication-api",
}

DEFAULT_ENDPOINTS = {
    "crossref": "https://api.crossref.org/works/",
    "datacite": "https://api.datacite.org/dois/",
    "doi": "https://citation.doi.org/metadata?doi=",
    "zbmath": "https://api.zbmath.org/v1/document/",
    "orcid": "https://pub.orcid.org/v3.0/",
    "wikidata": "https://www.wikidata.org/w/api.php",
}

_DOI_RE = re.compile(r"^10\.\S+/\S+$")
_DOI_PREFIXES = ("https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "http://dx.doi.org/", "doi:")
_WIKIBASE_ID_RE = re.compile(r"^[QP][0-9]+$")


def normalize_doi(raw: str) -> str:
    """Lowercase, resolver prefix stripped; raises InvalidDoi otherwise."""
    doi = (raw or "").strip()
    for prefix in _DOI_PREFIXES:
        if doi.lower().startswith(prefix):
            doi = doi[len(prefix):]
            break
    doi = doi.lower()
    if not _DOI_RE.match(doi):
        raise InvalidDoi(f"not a DOI: {raw!r}")
    return doi


@dataclass(frozen=True)
class SourceConfig:
    source_id: str
    kind: str
    endpoint_url: str = ""
    mode: str = "fixture"
    fixture_dir: str | None = None
    auth_ref: str | None = None
    timeout_ms: int = 10000
    cache_ttl_s: int = 3600

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ConfigError(f"source {self.source_id!r}: timeoutMs must be positive")
        if self.mode == "live" and self.kind != "user" and not self.endpoint_url:
            raise ConfigError(f"source {self.source_id!r}: live mode needs an endpoint url")


def bundled_fixture_dir(source_id: str) -> str:
    return str(importlib_resources.files("mdk").joinpath(f"data/fixtures/{source_id}"))


def configs_from_env(environ=None) -> dict[str, SourceConfig]:
    env = os.environ if environ is None else environ
    configs = {}
    for sid in ALL_SOURCES:
        key = sid.upper().replace("-", "_")
        mode = env.get(f"MDK_SOURCE_{key}_MODE", "fixture")
        url = env.get(f"MDK_SOURCE_{key}_URL", DEFAULT_ENDPOINTS.get(sid, ""))
        configs[sid] = SourceConfig(
            source_id=sid,
            kind=SOURCE_KINDS[sid],
            endpoint_url=url,
            mode=mode,
            fixture_dir=bundled_fixture_dir(sid) if mode == "fixture" else None,
        )
    return configs


@dataclass
class EntityDoc:
    """Normalized entity record as a source exposes it."""

    source: str
    local_id: str
    class_name: str
    label: str
    description: str = ""
    aliases: tuple = ()
    fields: dict = field(default_factory=dict)
    relations: dict = field(default_factory=dict)  # relation name -> [local ids]
    cross_refs: dict = field(default_factory=dict)  # source id -> local id

    @property
    def uri(self) -> str:
        return entity_uri(self.source, self.local_id)

    def as_ref(self) -> EntityRef:
        return EntityRef(source=self.source, local_id=self.local_id, label=self.label, description=self.description)


class _TtlCache:
    def __init__(self, ttl_s: float):
        self.ttl_s = ttl_s
        self._data = {}
        self._lock = threading.Lock()

    def get(self, key, loader):
        now = time.monotonic()
        with self._lock:
            hit = self._data.get(key)
            if hit is not None and now - hit[0] < self.ttl_s:
                return hit[1]
        value = loader()
        with self._lock:
            self._data[key] = (now, value)
        return value


# ---------------------------------------------------------------------------
# Fixture source


class FixtureSource:
    """Offline mirror of one source, loaded from a directory of JSON files.

    entities.json     {"entities": [{localId, class, label, description,
                       aliases, fields, relations, crossRefs}, ...]}
    publications.json {"publications": {doi: {title, authors, venue, year}}}
    authors.json      {"authors": {lowercased name: orcid id}}  (orcid only)

    A triple view of the entities backs sparql_select, so fixture sources
    answer exactly the queries the engine generates.
    """

    def __init__(self, config: SourceConfig, schema: CatalogSchema | None = None):
        self.config = config
        self.source_id = config.source_id
        self.schema = schema
        self.down = False  # tests flip this to simulate an outage
        self._view: TripleStore | None = None
        root = Path(config.fixture_dir or bundled_fixture_dir(config.source_id))
        self._entities: dict[str, EntityDoc] = {}
        entities_file = root / "entities.json"
        if entities_file.exists():
            doc = json.loads(entities_file.read_text(encoding="utf-8"))
            for raw in doc.get("entities", []):
                e = EntityDoc(
                    source=self.source_id,
                    local_id=raw["localId"],
                    class_name=raw.get("class", ""),
                    label=raw.get("label", ""),
                    description=raw.get("description", ""),
                    aliases=tuple(raw.get("aliases", [])),
                    fields=dict(raw.get("fields", {})),
                    relations={k: list(v) for k, v in raw.get("relations", {}).items()},
                    cross_refs=dict(raw.get("crossRefs", {})),
                )
                self._entities[e.local_id] = e
        self._publications: dict[str, dict] = {}
        pub_file = root / "publications.json"
        if pub_file.exists():
            self._publications = json.loads(pub_file.read_text(encoding="utf-8")).get("publications", {})
        self._authors: dict[str, str] = {}
        authors_file = root / "authors.json"
        if authors_file.exists():
            self._authors = json.loads(authors_file.read_text(encoding="utf-8")).get("authors", {})

    def _check_up(self):
        if self.down:
            raise SourceUnavailable(f"source {self.source_id} unavailable", source=self.source_id, elapsed_s=0.0)

    def available(self) -> bool:
        return not self.down

    def entities(self):
        return list(self._entities.values())

    def search(self, query: str, class_names, limit: int):
        self._check_up()
        q = query.lower()
        hits = []
        for e in self._entities.values():
            if class_names and e.class_name not in class_names:
                continue
            haystacks = (e.label,) + e.aliases
            if any(q in h.lower() for h in haystacks):
                hits.append(e)
        hits.sort(key=lambda e: (0 if e.label.lower().startswith(q) else 1, e.label.lower(), e.local_id))
        return [e.as_ref() for e in hits[:limit]]

    def get_entity(self, local_id: str) -> EntityDoc:
        self._check_up()
        e = self._entities.get(local_id)
        if e is None:
            raise NotFound(f"{self.source_id} has no entity {local_id!r}")
        return e

    def find_by_label(self, label: str, class_names):
        self._check_up()
        needle = label.lower()
        hits = [
            e
            for e in self._entities.values()
            if (not class_names or e.class_name in class_names) and e.label.lower() == needle
        ]
        hits.sort(key=lambda e: e.local_id)
        return [e.as_ref() for e in hits]

    def find_by_cross_ref(self, source_id: str, local_id: str):
        self._check_up()
        for e in sorted(self._entities.values(), key=lambda e: e.local_id):
            if e.cross_refs.get(source_id) == local_id:
                return e.as_ref()
        return None

    def find_publication(self, doi: str):
        self._check_up()
        for e in sorted(self._entities.values(), key=lambda e: e.local_id):
            if e.class_name == "Publication" and e.fields.get("doi", "").lower() == doi:
                return e.as_ref()
        return None

    def get_publication_metadata(self, doi: str):
        self._check_up()
        return self._publications.get(doi)

    def find_author_id(self, name: str):
        self._check_up()
        return self._authors.get(name.lower())

    def triple_view(self) -> TripleStore:
        if self._view is None:
            store = TripleStore()
            for e in self._entities.values():
                subject = Uri(e.uri)
                if e.class_name and self.schema is not None and self.schema.has_class(e.class_name):
                    store.add(tripledesk.Triple(subject, Uri(vocab.RDF_TYPE), Uri(self.schema.class_def(e.class_name).uri)))
                elif e.class_name:
                    store.add(tripledesk.Triple(subject, Uri(vocab.RDF_TYPE), Uri(vocab.ONTOLOGY_NS + e.class_name)))
                store.add(tripledesk.Triple(subject, Uri(vocab.RDFS_LABEL), Literal(e.label)))
                store.add(tripledesk.Triple(subject, Uri(vocab.SCHEMA_DESCRIPTION), Literal(e.description)))
                for rel_name, targets in e.relations.items():
                    pred = Uri(vocab.relation_uri(self.schema, rel_name) if self.schema else vocab.ONTOLOGY_NS + rel_name)
                    for tid in targets:
                        store.add(tripledesk.Triple(subject, pred, Uri(entity_uri(self.source_id, tid))))
                for other_source, other_id in e.cross_refs.items():
                    store.add(tripledesk.Triple(subject, Uri(vocab.CROSS_REFERENCE), Uri(entity_uri(other_source, other_id))))
                doi = e.fields.get("doi")
                if doi:
                    store.add(tripledesk.Triple(subject, Uri(vocab.DOI), Literal(doi.lower())))
            self._view = store
        return self._view

    def sparql_select(self, query: str) -> ResultTable:
        self._check_up()
        try:
            ast = tripledesk.parse_query(query)
        except ParseError as exc:
            raise QueryRejected(f"{self.source_id} rejected query: {exc}") from None
        if ast.form != "select":
            raise QueryRejected(f"{self.source_id} accepts only SELECT over the query endpoint")
        return tripledesk.evaluate_select(self.triple_view(), ast)

    def wikibase_get_entity(self, entity_id: str) -> dict:
        e = self.get_entity(entity_id)
        return {
            "id": e.local_id,
            "labels": {"en": {"language": "en", "value": e.label}},
            "descriptions": {"en": {"language": "en", "value": e.description}},
            "claims": dict(e.fields.get("claims", {})) if isinstance(e.fields.get("claims"), dict) else {},
        }


# ---------------------------------------------------------------------------
# Live clients


class _HttpBase:
    def __init__(self, config: SourceConfig):
        self.config = config
        self.source_id = config.source_id

    def available(self) -> bool:
        return True

    def _request(self, method: str, url: str, **kwargs):
        timeout = self.config.timeout_ms / 1000.0
        started = time.monotonic()
        last_exc = None
        for _ in range(2):  # one retry on transient failure
            try:
                return requests.request(method, url, timeout=timeout, **kwargs)
            except requests.RequestException as exc:
                last_exc = exc
        elapsed = time.monotonic() - started
        raise SourceUnavailable(
            f"{self.source_id} unreachable: {last_exc}", source=self.source_id, elapsed_s=round(elapsed, 3)
        )


def _escape_regex_literal(text: str) -> str:
    # regex metacharacters neutralized, then the pattern itself escaped for
    # transport inside a quoted query string
    return re.escape(text).replace("\\", "\\\\").replace('"', '\\"')


class SparqlHttpSource(_HttpBase):
    """Client for a SPARQL endpoint sharing the canonical vocabulary."""

    def __init__(self, config: SourceConfig, schema: CatalogSchema):
        super().__init__(config)
        self.schema = schema

    def sparql_select(self, query: str) -> ResultTable:
        resp = self._request(
            "POST",
            self.config.endpoint_url,
            data={"query": query},
            headers={"Accept": "application/sparql-results+json"},
        )
        if resp.status_code != 200:
            raise QueryRejected(f"{self.source_id} returned {resp.status_code}: {resp.text[:500]}")
        return table_from_sparql_json(resp.json())

    def _select_refs(self, query: str):
        table = self.sparql_select(query)
        refs = []
        base = ENTITY_URI_BASES.get(self.source_id, "")
        for row in table.rows:
            entity = row.get("entity")
            label = row.get("label")
            description = row.get("description")
            if not isinstance(entity, Uri):
                continue
            local_id = entity.value[len(base):] if base and entity.value.startswith(base) else entity.value
            refs.append(
                EntityRef(
                    source=self.source_id,
                    local_id=local_id,
                    label=label.text if isinstance(label, Literal) else local_id,
                    description=description.text if isinstance(description, Literal) else "",
                    uri=entity.value,
                )
            )
        return refs

    def search(self, query: str, class_names, limit: int):
        refs = []
        for cls in class_names:
            if not self.schema.has_class(cls):
                continue
            text = (
                "SELECT ?entity ?label ?description\n"
                "WHERE {\n"
                f"  ?entity <{vocab.RDF_TYPE}> <{self.schema.class_def(cls).uri}> .\n"
                f"  ?entity <{vocab.RDFS_LABEL}> ?label .\n"
                f"  ?entity <{vocab.SCHEMA_DESCRIPTION}> ?description .\n"
                f'  FILTER regex(?label, "{_escape_regex_literal(query)}", "i")\n'
                "}\n"
                f"LIMIT {limit}\n"
            )
            refs.extend(self._select_refs(text))
        seen = set()
        out = []
        for r in refs:
            if r.uri not in seen:
                seen.add(r.uri)
                out.append(r)
        return out[:limit]

    def get_entity(self, local_id: str) -> EntityDoc:
        uri = entity_uri(self.source_id, local_id)
        table = self.sparql_select(f"SELECT ?p ?o WHERE {{ <{uri}> ?p ?o . }}")
        if not table.rows:
            raise NotFound(f"{self.source_id} has no entity {local_id!r}")
        doc = EntityDoc(source=self.source_id, local_id=local_id, class_name="", label=local_id)
        base = ENTITY_URI_BASES.get(self.source_id, "")
        for row in table.rows:
            p, o = row.get("p"), row.get("o")
            if not isinstance(p, Uri):
                continue
            if p.value == vocab.RDFS_LABEL and isinstance(o, Literal):
                doc.label = o.text
            elif p.value == vocab.SCHEMA_DESCRIPTION and isinstance(o, Literal):
                doc.description = o.text
            elif p.value == vocab.RDF_TYPE and isinstance(o, Uri):
                doc.class_name = o.value.rsplit("#", 1)[-1]
            elif p.value == vocab.CROSS_REFERENCE and isinstance(o, Uri):
                for sid, b in ENTITY_URI_BASES.items():
                    if o.value.startswith(b):
                        doc.cross_refs[sid] = o.value[len(b):]
            elif p.value.startswith(vocab.ONTOLOGY_NS) and isinstance(o, Uri) and base and o.value.startswith(base):
                doc.relations.setdefault(p.value[len(vocab.ONTOLOGY_NS):], []).append(o.value[len(base):])
        doc.fields = {"name": doc.label}
        if doc.description:
            doc.fields["description"] = doc.description
        return doc

    def find_by_label(self, label: str, class_names):
        anchored = "^" + _escape_regex_literal(label) + "$"
        refs = []
        for cls in class_names:
            if not self.schema.has_class(cls):
                continue
            text = (
                "SELECT ?entity ?label ?description\n"
                "WHERE {\n"
                f"  ?entity <{vocab.RDF_TYPE}> <{self.schema.class_def(cls).uri}> .\n"
                f"  ?entity <{vocab.RDFS_LABEL}> ?label .\n"
                f"  ?entity <{vocab.SCHEMA_DESCRIPTION}> ?description .\n"
                f'  FILTER regex(?label, "{anchored}", "i")\n'
                "}\n"
            )
            refs.extend(self._select_refs(text))
        return refs

    def find_by_cross_ref(self, source_id: str, local_id: str):
        target = entity_uri(source_id, local_id)
        if not target:
            return None
        text = (
            "SELECT ?entity ?label ?description\n"
            "WHERE {\n"
            f"  ?entity <{vocab.CROSS_REFERENCE}> <{target}> .\n"
            f"  ?entity <{vocab.RDFS_LABEL}> ?label .\n"
            f"  ?entity <{vocab.SCHEMA_DESCRIPTION}> ?description .\n"
            "}\n"
        )
        refs = self._select_refs(text)
        return refs[0] if refs else None

    def find_publication(self, doi: str):
        text = (
            "SELECT ?entity ?label ?description\n"
            "WHERE {\n"
            f'  ?entity <{vocab.DOI}> "{doi}" .\n'
            f"  ?entity <{vocab.RDFS_LABEL}> ?label .\n"
            f"  ?entity <{vocab.SCHEMA_DESCRIPTION}> ?description .\n"
            "}\n"
        )
        refs = self._select_refs(text)
        return refs[0] if refs else None


class WikibaseHttpSource(_HttpBase):
    """Wikibase action-API client (search, entity fetch); read-only."""

    def _api(self, params: dict) -> dict:
        params = dict(params, format="json")
        resp = self._request("GET", self.config.endpoint_url, params=params)
        if resp.status_code != 200:
            raise SourceUnavailable(
                f"{self.source_id} returned {resp.status_code}", source=self.source_id, elapsed_s=0.0
            )
        return resp.json()

    def search(self, query: str, class_names, limit: int):
        doc = self._api({"action": "wbsearchentities", "search": query, "language": "en", "type": "item", "limit": limit})
        refs = []
        for hit in doc.get("search", []):
            refs.append(
                EntityRef(
                    source=self.source_id,
                    local_id=hit["id"],
                    label=hit.get("label", hit["id"]),
                    description=hit.get("description", ""),
                )
            )
        return refs

    def get_entity(self, local_id: str) -> EntityDoc:
        doc = self._api({"action": "wbgetentities", "ids": local_id})
        entity = doc.get("entities", {}).get(local_id)
        if not entity or "missing" in entity:
            raise NotFound(f"{self.source_id} has no entity {local_id!r}")
        label = entity.get("labels", {}).get("en", {}).get("value", local_id)
        description = entity.get("descriptions", {}).get("en", {}).get("value", "")
        out = EntityDoc(source=self.source_id, local_id=local_id, class_name="", label=label, description=description)
        out.fields = {"name": label}
        if description:
            out.fields["description"] = description
        return out

    def find_by_label(self, label: str, class_names):
        return [r for r in self.search(label, class_names, 10) if r.label.lower() == label.lower()]

    def find_by_cross_ref(self, source_id: str, local_id: str):
        return None  # not derivable from the generic action API

    def find_publication(self, doi: str):
        return None

    def wikibase_get_entity(self, entity_id: str) -> dict:
        doc = self._api({"action": "wbgetentities", "ids": entity_id})
        entity = doc.get("entities", {}).get(entity_id)
        if not entity or "missing" in entity:
            raise NotFound(f"{self.source_id} has no entity {entity_id!r}")
        return {
            "id": entity_id,
            "labels": entity.get("labels", {}),
            "descriptions": entity.get("descriptions", {}),
            "claims": entity.get("claims", {}),
        }


class PublicationHttpSource(_HttpBase):
    """Client for one publication-metadata API; the parse differs per id."""

    def get_publication_metadata(self, doi: str):
        url = self.config.endpoint_url + doi
        headers = {"Accept": "application/json"}
        resp = self._request("GET", url, headers=headers)
        if resp.status_code == 404:
            return None
        if resp.status_code != 200:
            raise SourceUnavailable(
                f"{self.source_id} returned {resp.status_code}", source=self.source_id, elapsed_s=0.0
            )
        body = resp.json()
        parser = getattr(self, f"_parse_{self.source_id.replace('-', '_')}", None)
        return parser(body) if parser else None

    @staticmethod
    def _join_name(given: str, family: str) -> str:
        return " ".join(p for p in (given, family) if p)

    def _parse_crossref(self, body):
        msg = body.get("message", {})
        authors = []
        for a in msg.get("author", []):
            orcid = a.get("ORCID", "")
            authors.append({
                "name": self._join_name(a.get("given", ""), a.get("family", "")),
                "orcid": orcid.rsplit("/", 1)[-1] if orcid else None,
            })
        titles = msg.get("title", [])
        venues = msg.get("container-title", [])
        year = None
        issued = msg.get("issued", {}).get("date-parts", [])
        if issued and issued[0]:
            year = issued[0][0]
        return {"title": titles[0] if titles else "", "authors": authors, "venue": venues[0] if venues else "", "year": year}

    def _parse_datacite(self, body):
        attrs = body.get("data", {}).get("attributes", {})
        authors = []
        for c in attrs.get("creators", []):
            orcid = None
            for ident in c.get("nameIdentifiers", []):
                if ident.get("nameIdentifierScheme", "").lower() == "orcid":
                    orcid = ident.get("nameIdentifier", "").rsplit("/", 1)[-1] or None
            authors.append({"name": c.get("name", ""), "orcid": orcid})
        titles = attrs.get("titles", [])
        return {
            "title": titles[0].get("title", "") if titles else "",
            "authors": authors,
            "venue": attrs.get("publisher", ""),
            "year": attrs.get("publicationYear"),
        }

    def _parse_doi(self, body):
        # content-negotiation endpoint returns CSL JSON
        authors = []
        for a in body.get("author", []):
            orcid = a.get("ORCID", "")
            authors.append({
                "name": self._join_name(a.get("given", ""), a.get("family", "")),
                "orcid": orcid.rsplit("/", 1)[-1] if orcid else None,
            })
        year = None
        issued = body.get("issued", {}).get("date-parts", [])
        if issued and issued[0]:
            year = issued[0][0]
        return {"title": body.get("title", ""), "authors": authors, "venue": body.get("container-title", ""), "year": year}

    def _parse_zbmath(self, body):
        result = body.get("result", body)
        if isinstance(result, list):
            result = result[0] if result else {}
        authors = [{"name": a.get("name", ""), "orcid": None} for a in result.get("contributors", {}).get("authors", [])]
        source = result.get("source", {})
        return {
            "title": result.get("title", {}).get("title", "") if isinstance(result.get("title"), dict) else result.get("title", ""),
            "authors": authors,
            "venue": source.get("series", [{}])[0].get("title", "") if source.get("series") else "",
            "year": source.get("year"),
        }

    def find_author_id(self, name: str):
        url = self.config.endpoint_url + "expanded-search/?q=" + requests.utils.quote(name)
        resp = self._request("GET", url, headers={"Accept": "application/json"})
        if resp.status_code != 200:
            return None
        hits = resp.json().get("expanded-result") or []
        return hits[0].get("orcid-id") if hits else None


def make_client(config: SourceConfig, schema: CatalogSchema):
    if config.mode == "fixture":
        return FixtureSource(config, schema)
    if config.kind == "sparql-endpoint":
        return SparqlHttpSource(config, schema)
    if config.kind == "wikibase-api":
        return WikibaseHttpSource(config)
    if config.kind == "publication-api":
        return PublicationHttpSource(config)
    raise ConfigError(f"source {config.source_id!r}: unknown kind {config.kind!r}")


# ---------------------------------------------------------------------------
# Publication records


@dataclass
class PublicationRecord:
    doi: str = ""
    url: str = ""
    title: str = ""
    authors: list = field(default_factory=list)  # [{name, orcid}]
    venue: str = ""
    year: int | None = None
    entity_refs: list = field(default_factory=list)
    source_trail: list = field(default_factory=list)  # [{source, outcome}]

    def citation(self) -> str:
        names = ", ".join(a["name"] for a in self.authors if a.get("name"))
        parts = [p for p in (names, self.title, self.venue, str(self.year) if self.year else "") if p]
        text = ". ".join(parts)
        if self.doi:
            text = f"{text}. https://doi.org/{self.doi}" if text else f"https://doi.org/{self.doi}"
        elif self.url:
            text = f"{text}. {self.url}" if text else self.url
        return text

    def to_json(self):
        return {
            "doi": self.doi,
            "url": self.url,
            "title": self.title,
            "authors": [dict(a) for a in self.authors],
            "venue": self.venue,
            "year": self.year,
            "entityRefs": [r.to_json() for r in self.entity_refs],
            "sourceTrail": [dict(t) for t in self.source_trail],
        }

    @classmethod
    def from_json(cls, doc) -> "PublicationRecord":
        return cls(
            doi=doc.get("doi", ""),
            url=doc.get("url", ""),
            title=doc.get("title", ""),
            authors=[dict(a) for a in doc.get("authors", [])],
            venue=doc.get("venue", ""),
            year=doc.get("year"),
            entity_refs=[EntityRef.from_json(r) for r in doc.get("entityRefs", [])],
            source_trail=[dict(t) for t in doc.get("sourceTrail", [])],
        )


# ---------------------------------------------------------------------------
# Hub


class SourceHub:
    """Federates the configured sources behind one object.

    All consultations are appended to `consultations` in the order they were
    decided (groups in priority order for autocomplete, fixed cascade order
    for publications), regardless of wire-level interleaving.
    """

    def __init__(self, schema: CatalogSchema, configs: dict | None = None, cache_ttl_s: float = 3600.0):
        self.schema = schema
        self.configs = configs if configs is not None else configs_from_env()
        self.clients = {sid: make_client(cfg, schema) for sid, cfg in self.configs.items()}
        self.cache = _TtlCache(cache_ttl_s)
        self.consultations: list[dict] = []
        self._lock = threading.Lock()

    def _record(self, source: str, op: str, outcome: str):
        with self._lock:
            self.consultations.append({"source": source, "op": op, "outcome": outcome})

    def reset_trace(self):
        with self._lock:
            self.consultations = []

    def get(self, source_id: str):
        client = self.clients.get(source_id)
        if client is None:
            raise ConfigError(f"no source configured with id {source_id!r}")
        return client

    def get_entity(self, source_id: str, local_id: str) -> EntityDoc:
        client = self.get(source_id)
        return self.cache.get(("entity", source_id, local_id), lambda: client.get_entity(local_id))

    def availability(self) -> dict:
        out = {}
        for sid in sorted(self.clients):
            try:
                out[sid] = "ok" if self.clients[sid].available() else "unavailable"
            except Exception:
                out[sid] = "unavailable"
        return out

    # -- autocomplete -------------------------------------------------------

    def autocomplete(self, query: str, class_name: str, limit: int = 10):
        """Per-source hit groups in the class's priority order. Unavailable
        sources yield an empty group flagged instead of failing the call."""
        if not query:
            raise ValueError("autocomplete query must be non-empty")
        if limit < 1:
            raise ValueError("limit must be >= 1")
        class_def = self.schema.class_def(class_name)
        accepted = self.schema.search_classes(class_name)

        def one(source_id):
            try:
                refs = self.get(source_id).search(query, accepted, limit)
                return {"source": source_id, "status": "ok", "refs": refs}
            except SourceUnavailable:
                return {"source": source_id, "status": "unavailable", "refs": []}

        order = class_def.source_priority
        with ThreadPoolExecutor(max_workers=max(1, len(order))) as pool:
            groups = list(pool.map(one, order))
        for g in groups:
            self._record(g["source"], "search", g["status"])
        return groups

    # -- details ------------------------------------------------------------

    def fetch_details(self, ref: EntityRef, class_name: str):
        """Info-box fields plus schema-declared relations the source can
        instantiate, targets as EntityRefs of the same source."""
        if ref.source == "user":
            raise SchemaMismatch("user-entered items have no source to fetch from")
        doc = self.get_entity(ref.source, ref.local_id)
        class_def = self.schema.class_def(class_name)
        fields = {}
        for fd in class_def.info_box_fields:
            if fd.name in doc.fields:
                fields[fd.name] = doc.fields[fd.name]
            elif fd.name == "name" and doc.label:
                fields["name"] = doc.label
            elif fd.name == "description" and doc.description:
                fields["description"] = doc.description
        relations = {}
        for rel in self.schema.relations_from(class_name):
            targets = doc.relations.get(rel.name, [])
            refs = []
            for tid in targets:
                try:
                    refs.append(self.get_entity(ref.source, tid).as_ref())
                except NotFound:
                    continue
                except SourceUnavailable:
                    refs.append(EntityRef(source=ref.source, local_id=tid, label=tid))
            if refs:
                relations[rel.name] = refs
        self._record(ref.source, "fetch-details", "ok")
        return {"fields": fields, "relations": relations}

    # -- publications -------------------------------------------------------

    def resolve_publication(self, doi: str) -> PublicationRecord:
        """The DOI cascade. Knowledge graphs are consulted first (an existing
        publication entity short-circuits nothing: the trail stays complete),
        then the metadata APIs in fixed order with first-writer-wins merging;
        orcid runs last, only to add missing author ids. A complete miss is
        not an error: the record comes back with the full trail and no
        metadata."""
        doi = normalize_doi(doi)
        record = PublicationRecord(doi=doi)

        for source_id in CASCADE_KG_ORDER:
            outcome = "miss"
            try:
                ref = self.get(source_id).find_publication(doi)
                if ref is not None:
                    outcome = "hit"
                    record.entity_refs.append(ref)
                    if not record.title and ref.label:
                        record.title = ref.label
            except SourceUnavailable:
                outcome = "unavailable"
            record.source_trail.append({"source": source_id, "outcome": outcome})
            self._record(source_id, "publication-lookup", outcome)

        for source_id in CASCADE_API_ORDER:
            outcome = "miss"
            try:
                meta = self.get(source_id).get_publication_metadata(doi)
                if meta:
                    outcome = "hit"
                    if not record.title and meta.get("title"):
                        record.title = meta["title"]
                    if not record.authors and meta.get("authors"):
                        record.authors = [
                            {"name": a.get("name", ""), "orcid": a.get("orcid")} for a in meta["authors"]
                        ]
                    if not record.venue and meta.get("venue"):
                        record.venue = meta["venue"]
                    if record.year is None and meta.get("year") is not None:
                        record.year = meta["year"]
            except SourceUnavailable:
                outcome = "unavailable"
            record.source_trail.append({"source": source_id, "outcome": outcome})
            self._record(source_id, "publication-metadata", outcome)

        needs_ids = [a for a in record.authors if not a.get("orcid")]
        if needs_ids:
            outcome = "miss"
            try:
                client = self.get(ORCID_SOURCE)
                for author in needs_ids:
                    found = client.find_author_id(author["name"]) if author.get("name") else None
                    if found:
                        author["orcid"] = found
                        outcome = "hit"
            except SourceUnavailable:
                outcome = "unavailable"
        else:
            outcome = "skipped"
        record.source_trail.append({"source": ORCID_SOURCE, "outcome": outcome})
        self._record(ORCID_SOURCE, "orcid-enrichment", outcome)
        return record

    # -- raw protocol passthroughs -----------------------------------------

    def sparql_select(self, source_id: str, query: str) -> ResultTable:
        client = self.get(source_id)
        if not hasattr(client, "sparql_select"):
            raise ConfigError(f"source {source_id!r} is not a query endpoint")
        table = client.sparql_select(query)
        self._record(source_id, "sparql-select", "ok")
        return table

    def wikibase_get_entity(self, source_id: str, entity_id: str) -> dict:
        if not _WIKIBASE_ID_RE.match(entity_id or ""):
            raise MalformedId(f"not a wikibase entity id: {entity_id!r}")
        client = self.get(source_id)
        if not hasattr(client, "wikibase_get_entity"):
            raise ConfigError(f"source {source_id!r} is not a wikibase")
        return client.wikibase_get_entity(entity_id)
