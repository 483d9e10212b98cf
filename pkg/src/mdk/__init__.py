"""Documentation and search engine for mathematical research data.

The package federates knowledge-graph sources behind guided questionnaires,
validates the result for completeness and connectedness, and exports it as
SPARQL INSERT queries or wikibase edits. An embedded triple store covers the
generated query subset end to end, so everything here runs without network
access against the bundled source snapshots.
"""

from .errors import MdkError
from .interview import (
    add_publication,
    answer_select,
    apply_automation,
    deserialize_session,
    link_items,
    replay_audit,
    serialize_session,
    set_field,
    set_intra_relation,
    start_session,
)
from .exporter import build_preview, execute_export, plan_export, render_insert_queries, writeback_pids
from .registry import EntityRef, Item, ItemRegistry, resolve_to_preferred
from .schema import CatalogSchema, default_schema, downstream_closure, load_schema, required_relations, serialize_schema
from .search import SearchSpec, build_search, execute_search, summarize_results
from .sources import PublicationRecord, SourceHub
from .tripledesk import TripleStore, apply_insert, evaluate_select, parse_query, run_query
from .validation import ValidationReport, Violation, validate_session

__version__ = "0.3.0"

__all__ = [
    "CatalogSchema",
    "EntityRef",
    "Item",
    "ItemRegistry",
    "MdkError",
    "PublicationRecord",
    "SearchSpec",
    "SourceHub",
    "TripleStore",
    "ValidationReport",
    "Violation",
    "add_publication",
    "answer_select",
    "apply_automation",
    "apply_insert",
    "build_preview",
    "build_search",
    "default_schema",
    "deserialize_session",
    "downstream_closure",
    "evaluate_select",
    "execute_export",
    "execute_search",
    "link_items",
    "load_schema",
    "parse_query",
    "plan_export",
    "render_insert_queries",
    "replay_audit",
    "required_relations",
    "resolve_to_preferred",
    "run_query",
    "serialize_schema",
    "serialize_session",
    "set_field",
    "set_intra_relation",
    "start_session",
    "summarize_results",
    "validate_session",
    "writeback_pids",
]
