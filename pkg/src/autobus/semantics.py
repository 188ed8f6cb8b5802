"""Enterprise data to knowledge graph to logic facts.

Tables come in as CSV (RFC 4180) or JSON arrays of flat objects. Each row
becomes an entity node star-linked to one value node per non-null
attribute; fragments merge on shared values, relationships materialize
from key joins, and the result compiles to ground facts plus foundational
rules derived from schema constraints:

    row c123 ──resides_in──> value "rivertown"      (graph)
    consumer(c123).  resides_in(c123, rivertown).   (facts)

Value nodes are canonical: one node per (declared type, lexical form), so
stars that share a value are connected in the merged graph.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from autobus.logic import (
    Atom,
    Clause,
    Compound,
    Literal,
    Num,
    Str,
    Term,
    is_atom_name,
    parse_term,
    render_clause,
    unsafe_negation_var,
)
from autobus.logic.clauses import FACTS
from autobus.logic.parser import _Parser, tokenize

ATTRIBUTE_TYPES = ("id", "number", "text", "enum")


class SemanticsError(Exception):
    pass


class SchemaError(SemanticsError):
    pass


class IngestError(SemanticsError):
    pass


@dataclass(frozen=True)
class AttributeDecl:
    column: str
    predicate: str
    type: str
    values: Tuple[str, ...] = ()  # enum domain, when type == "enum"

    def __post_init__(self):
        if self.type not in ATTRIBUTE_TYPES:
            raise SchemaError(f"unknown attribute type {self.type!r} for column {self.column!r}")


@dataclass(frozen=True)
class EntityDecl:
    name: str
    key_column: str
    attributes: Tuple[AttributeDecl, ...] = ()


@dataclass(frozen=True)
class RelationshipDecl:
    """A binary relation ``name(from_id, to_id)`` joined on key values.

    ``via_entity`` names the side whose table carries ``via_column``; the
    column's values are keys of the opposite side.
    """

    name: str
    from_type: str
    to_type: str
    via_entity: str
    via_column: str


@dataclass(frozen=True)
class ConstraintDecl:
    kind: str  # status_domain | required_relationship | rule_template
    params: Mapping[str, object]


@dataclass(frozen=True)
class EntitySchema:
    entity_types: Tuple[EntityDecl, ...]
    relationships: Tuple[RelationshipDecl, ...] = ()
    constraints: Tuple[ConstraintDecl, ...] = ()

    def __post_init__(self):
        names = [e.name for e in self.entity_types]
        if len(names) != len(set(names)):
            raise SchemaError("duplicate entity type names")
        for rel in self.relationships:
            for side in (rel.from_type, rel.to_type):
                if side not in names:
                    raise SchemaError(f"relationship {rel.name!r} references unknown entity {side!r}")
            if rel.via_entity not in (rel.from_type, rel.to_type):
                raise SchemaError(f"relationship {rel.name!r}: via_entity must be one endpoint")

    def entity(self, name: str) -> EntityDecl:
        for e in self.entity_types:
            if e.name == name:
                return e
        raise SchemaError(f"unknown entity type {name!r}")

    def predicate_signatures(self) -> Dict[Tuple[str, int], str]:
        """Everything the schema can produce facts for: pred -> origin note."""
        out: Dict[Tuple[str, int], str] = {}
        for e in self.entity_types:
            out[(e.name, 1)] = f"entity {e.name}"
            for attr in e.attributes:
                out[(attr.predicate, 2)] = f"attribute {e.name}.{attr.column}"
        for rel in self.relationships:
            out[(rel.name, 2)] = f"relationship {rel.from_type}->{rel.to_type}"
        return out


def load_schema(source: Union[str, Path, Mapping]) -> EntitySchema:
    """Read a schema from a JSON document (path, text, or parsed dict)."""
    if isinstance(source, Mapping):
        doc = source
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        doc = json.loads(source)
    else:
        doc = json.loads(Path(source).read_text())
    entities = tuple(
        EntityDecl(
            name=e["name"],
            key_column=e["key"],
            attributes=tuple(
                AttributeDecl(
                    column=a["column"],
                    predicate=a["predicate"],
                    type=a["type"],
                    values=tuple(a.get("values", ())),
                )
                for a in e.get("attributes", ())
            ),
        )
        for e in doc.get("entities", ())
    )
    relationships = tuple(
        RelationshipDecl(
            name=r["name"],
            from_type=r["from"],
            to_type=r["to"],
            via_entity=r["via_entity"],
            via_column=r["via_column"],
        )
        for r in doc.get("relationships", ())
    )
    constraints = tuple(
        ConstraintDecl(kind=c["kind"], params=c.get("params", {}))
        for c in doc.get("constraints", ())
    )
    return EntitySchema(entities, relationships, constraints)


# ---------------------------------------------------------------------------
# Knowledge graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KGTriple:
    subject: str
    predicate: str
    object: str


@dataclass
class Node:
    kind: str  # entity | value
    payload: dict = field(default_factory=dict)


@dataclass
class KnowledgeGraph:
    nodes: Dict[str, Node] = field(default_factory=dict)
    triples: List[KGTriple] = field(default_factory=list)

    def entity_nodes(self) -> List[Tuple[str, Node]]:
        return [(nid, n) for nid, n in self.nodes.items() if n.kind == "entity"]

    def validate(self) -> None:
        for t in self.triples:
            if t.subject not in self.nodes:
                raise IngestError(f"triple subject {t.subject!r} has no node")
            if t.object not in self.nodes:
                raise IngestError(f"triple object {t.object!r} has no node")
            if not t.predicate:
                raise IngestError("triple with empty predicate")


def mangle_key(raw: str, entity_type: str) -> str:
    """Entity node id for a raw key: lowercased, prefixed and sanitized
    only when the raw form is not already atom-shaped."""
    lowered = str(raw).lower()
    if is_atom_name(lowered):
        return lowered
    candidate = entity_type[0] + lowered
    cleaned = "".join(ch if ch.isalnum() or ch == "_" else "_" for ch in candidate)
    if not is_atom_name(cleaned):
        cleaned = entity_type[0] + "_" + cleaned.lstrip("_")
    return cleaned


def _value_node_id(attr_type: str, lexical: str) -> str:
    return f"val:{attr_type}:{lexical}"


def _coerce_value(raw: object, attr: AttributeDecl, row_key: str) -> Tuple[str, Term]:
    """Returns (canonical lexical form, fact argument term)."""
    text = str(raw).strip()
    if attr.type == "number":
        try:
            value = int(text) if "." not in text and "e" not in text.lower() else float(text)
        except ValueError:
            raise IngestError(
                f"row {row_key!r}, column {attr.column!r}: {text!r} is not a number"
            ) from None
        return repr(value), Num(value)
    if attr.type == "enum":
        if attr.values and text not in attr.values:
            raise IngestError(
                f"row {row_key!r}, column {attr.column!r}: {text!r} not in {list(attr.values)}"
            )
        if not is_atom_name(text):
            raise IngestError(
                f"row {row_key!r}, column {attr.column!r}: enum value {text!r} is not atom-shaped"
            )
        return text, Atom(text)
    if attr.type == "id":
        mangled = mangle_key(text, attr.predicate)
        return mangled, Atom(mangled)
    # text
    if is_atom_name(text):
        return text, Atom(text)
    return text, Str(text)


def _is_null(value: object) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def ingest_table(
    rows: Iterable[Mapping[str, object]],
    schema: EntitySchema,
    entity_type: str,
) -> KnowledgeGraph:
    """One table to one star-shaped graph fragment.

    Every row becomes an entity node; every non-null declared attribute
    becomes a value node plus one triple from the row node. Missing values
    produce neither node nor triple.
    """
    decl = schema.entity(entity_type)
    kg = KnowledgeGraph()
    seen_keys = set()
    for row in rows:
        if decl.key_column not in row or _is_null(row[decl.key_column]):
            raise IngestError(f"{entity_type}: row missing key column {decl.key_column!r}")
        raw_key = str(row[decl.key_column]).strip()
        node_id = mangle_key(raw_key, entity_type)
        if node_id in seen_keys:
            raise IngestError(f"{entity_type}: duplicate key {raw_key!r}")
        seen_keys.add(node_id)
        kg.nodes[node_id] = Node(
            kind="entity",
            payload={"type": entity_type, "key": raw_key, "row": dict(row)},
        )
        for attr in decl.attributes:
            raw = row.get(attr.column)
            if _is_null(raw):
                continue
            lexical, term = _coerce_value(raw, attr, raw_key)
            vid = _value_node_id(attr.type, lexical)
            if vid not in kg.nodes:
                kg.nodes[vid] = Node(
                    kind="value",
                    payload={"type": attr.type, "lexical": lexical, "term": term},
                )
            kg.triples.append(KGTriple(node_id, attr.predicate, vid))
    return kg


def link_shared_values(
    fragments: Sequence[KnowledgeGraph],
    schema: Optional[EntitySchema] = None,
) -> KnowledgeGraph:
    """Merge fragments into one graph.

    Value nodes with the same (type, lexical form) collapse into a single
    node; schema relationships materialize as entity-to-entity triples by
    joining foreign-key column values against entity keys.
    """
    merged = KnowledgeGraph()
    for fragment in fragments:
        for nid, node in fragment.nodes.items():
            existing = merged.nodes.get(nid)
            if existing is None:
                merged.nodes[nid] = node
            elif existing.kind != node.kind:
                raise IngestError(f"node {nid!r} is both {existing.kind} and {node.kind}")
        merged.triples.extend(fragment.triples)

    if schema is not None:
        by_type_key: Dict[Tuple[str, str], str] = {}
        for nid, node in merged.entity_nodes():
            by_type_key[(node.payload["type"], node.payload["key"])] = nid
        for rel in schema.relationships:
            other_type = rel.to_type if rel.via_entity == rel.from_type else rel.from_type
            for nid, node in merged.entity_nodes():
                if node.payload["type"] != rel.via_entity:
                    continue
                raw = node.payload["row"].get(rel.via_column)
                if _is_null(raw):
                    continue
                other = by_type_key.get((other_type, str(raw).strip()))
                if other is None:
                    raise IngestError(
                        f"relationship {rel.name!r}: {node.payload['key']!r} references "
                        f"missing {other_type} key {raw!r}"
                    )
                if rel.via_entity == rel.from_type:
                    merged.triples.append(KGTriple(nid, rel.name, other))
                else:
                    merged.triples.append(KGTriple(other, rel.name, nid))
    merged.validate()
    return merged


# ---------------------------------------------------------------------------
# Fact compilation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactSet:
    facts: Tuple[Clause, ...]
    foundational_rules: Tuple[Clause, ...] = ()

    def __post_init__(self):
        for fact in self.facts:
            if not fact.is_fact or not fact.is_ground:
                raise SemanticsError(f"not a ground fact: {render_clause(fact)}")
        for rule in self.foundational_rules:
            if _unsafe_rule_var(rule) is not None:
                raise SemanticsError(f"unsafe rule: {render_clause(rule)}")

    def fact_predicates(self) -> set:
        out = set()
        for fact in self.facts:
            head = fact.head
            if isinstance(head, Compound):
                out.add((head.functor, len(head.args)))
            else:
                out.add((head.name, 0))
        return out

    def render(self) -> str:
        lines = ["% SECTION: facts"]
        lines.extend(render_clause(f) for f in self.facts)
        lines.extend(render_clause(r) for r in self.foundational_rules)
        return "\n".join(lines) + "\n"


def _unsafe_rule_var(rule: Clause):
    """Head variable with no positive body occurrence, or an unsafe negation."""
    from autobus.logic import term_vars

    bad = unsafe_negation_var(rule)
    if bad is not None:
        return bad
    positive = set()
    for lit in rule.body:
        if not lit.negated:
            positive.update(v.key for v in term_vars(lit.goal))
    for v in term_vars(rule.head):
        if not v.is_anonymous and v.key not in positive:
            return v
    return None


def kg_to_facts(kg: KnowledgeGraph, schema: EntitySchema) -> FactSet:
    """Compile a validated graph to ground facts (bijective with the
    graph: one unary fact per entity node, one binary fact per triple)."""
    kg.validate()
    declared = {(p, a) for (p, a) in schema.predicate_signatures()}
    facts: List[Clause] = []
    for nid, node in kg.entity_nodes():
        facts.append(Clause(Compound(node.payload["type"], [Atom(nid)])))
    for triple in kg.triples:
        if (triple.predicate, 2) not in declared:
            raise SemanticsError(f"triple predicate {triple.predicate!r} is not declared in the schema")
        obj_node = kg.nodes[triple.object]
        if obj_node.kind == "value":
            obj_term = obj_node.payload["term"]
        else:
            obj_term = Atom(triple.object)
        facts.append(Clause(Compound(triple.predicate, [Atom(triple.subject), obj_term])))
    return FactSet(tuple(facts), tuple(schema_to_rules(schema)))


# ---------------------------------------------------------------------------
# Foundational rules from constraints
# ---------------------------------------------------------------------------


def _parse_body(text: str) -> List[Literal]:
    parser = _Parser(tokenize(text))
    literals = [parser.literal()]
    while parser.peek().kind == "PUNCT" and parser.peek().text == ",":
        parser.advance()
        literals.append(parser.literal())
    if parser.peek().kind != "EOF":
        parser.error("trailing input after rule body")
    return literals


def schema_to_rules(schema: EntitySchema) -> List[Clause]:
    """Foundational rules compiled from schema constraints.

    status_domain: a derived predicate marking entities whose status
    attribute has a given value and that are linked by a relationship,
    e.g. ``active_subscription(S) :- has_status(S, active), subscribe(_, S).``

    required_relationship: a satisfaction-check predicate, e.g.
    ``has_subscriber(S) :- subscribe(_, S).``

    rule_template: head and body given directly as ABL text.
    """
    rules: List[Clause] = []
    for constraint in schema.constraints:
        p = constraint.params
        if constraint.kind == "status_domain":
            entity = str(p["entity"])
            status_pred = str(p.get("status_predicate", "has_status"))
            value = str(p["value"])
            derived = str(p["derived_predicate"])
            head = Compound(derived, [_fresh("S")])
            body = [Literal(Compound(status_pred, [_fresh("S"), Atom(value)]))]
            linked = p.get("linked_via")
            if linked:
                rel = _find_relationship(schema, str(linked))
                if rel.to_type == entity:
                    body.append(Literal(Compound(rel.name, [_anon(1), _fresh("S")])))
                else:
                    body.append(Literal(Compound(rel.name, [_fresh("S"), _anon(1)])))
            rules.append(Clause(head, body))
        elif constraint.kind == "required_relationship":
            rel = _find_relationship(schema, str(p["relationship"]))
            check = str(p["check_predicate"])
            entity = str(p["entity"])
            if rel.to_type == entity:
                body = [Literal(Compound(rel.name, [_anon(1), _fresh("X")]))]
            else:
                body = [Literal(Compound(rel.name, [_fresh("X"), _anon(1)]))]
            rules.append(Clause(Compound(check, [_fresh("X")]), body))
        elif constraint.kind == "rule_template":
            head = parse_term(str(p["head"]))
            body = _parse_body(str(p["body"]))
            rule = Clause(head, body)
            bad = _unsafe_rule_var(rule)
            if bad is not None:
                raise SchemaError(
                    f"unsafe rule template (variable {bad.name!r} unbound): {render_clause(rule)}"
                )
            rules.append(rule)
        else:
            raise SchemaError(f"unknown constraint kind {constraint.kind!r}")
    return rules


def _find_relationship(schema: EntitySchema, name: str) -> RelationshipDecl:
    for rel in schema.relationships:
        if rel.name == name:
            return rel
    raise SchemaError(f"unknown relationship {name!r}")


def _fresh(name: str):
    from autobus.logic import Var

    return Var(name)


def _anon(n: int):
    from autobus.logic import Var

    return Var("_", f"_#{n}")


# ---------------------------------------------------------------------------
# Table loading
# ---------------------------------------------------------------------------


def load_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_csv_text(text: str) -> List[Dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def load_json_rows(path: Union[str, Path]) -> List[Dict[str, object]]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise IngestError(f"{path}: expected a JSON array of objects")
    return data


def build_fact_set(
    tables: Mapping[str, Iterable[Mapping[str, object]]],
    schema: EntitySchema,
) -> FactSet:
    """Ingest every table, merge, and compile: the one-call path from raw
    rows to a queryable FactSet."""
    fragments = [ingest_table(rows, schema, entity) for entity, rows in tables.items()]
    merged = link_shared_values(fragments, schema)
    return kg_to_facts(merged, schema)
