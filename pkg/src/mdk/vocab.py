"""Shared RDF vocabulary.

Every class and relation in a schema carries one canonical ontology uri, so a
single generated query works against any triple view of the data (bundled
fixtures, export sinks, conforming endpoints). Wikibase-specific ids live in
the schema's per-source `wikibase` maps instead.
"""

from __future__ import annotations

ONTOLOGY_NS = "https://w3id.org/mdk/ontology#"

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
SCHEMA_DESCRIPTION = "http://schema.org/description"

# links an entity to its counterpart in another source, object = counterpart uri
CROSS_REFERENCE = ONTOLOGY_NS + "crossReference"
# literal DOI on publication entities, normalized form
DOI = ONTOLOGY_NS + "doi"


def relation_uri(schema, name: str) -> str:
    """Declared predicate uri for a relation name; minted from the ontology
    namespace when a triple view needs a predicate the schema doesn't declare."""
    for rel in schema.relations_named(name):
        return rel.uri
    return ONTOLOGY_NS + name
