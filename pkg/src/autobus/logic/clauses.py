"""Clauses, programs, and the three-section partition layout."""

from __future__ import annotations

from typing import Dict, Iterable, Optional, Sequence, Tuple

from autobus.logic.errors import UnsafeNegationError
from autobus.logic.terms import (
    Atom,
    Compound,
    Term,
    Var,
    render_term,
    term_vars,
)

# Partition tags, in canonical render order.
FACTS = "facts_foundational"
RULES = "task_rules"
ACTIONS = "actions"
PARTITION_TAGS = (FACTS, RULES, ACTIONS)

SECTION_NAMES = {FACTS: "facts", RULES: "rules", ACTIONS: "actions"}
SECTION_TAGS = {v: k for k, v in SECTION_NAMES.items()}


class Literal:
    """One body goal, positive or negated."""

    __slots__ = ("negated", "goal")

    def __init__(self, goal: Term, negated: bool = False):
        if not isinstance(goal, (Atom, Compound)):
            raise ValueError(f"literal goal must be callable: {render_term(goal)}")
        self.goal = goal
        self.negated = negated

    def term(self) -> Term:
        """The literal as a plain term (negation in not/1 wrapper form)."""
        if self.negated:
            return Compound("not", [self.goal])
        return self.goal

    def __eq__(self, other):
        return (
            isinstance(other, Literal)
            and other.negated == self.negated
            and other.goal == self.goal
        )

    def __hash__(self):
        return hash((self.negated, self.goal))

    def __repr__(self):
        return f"Literal({render_term(self.term())})"


class Clause:
    """``head :- body`` (a fact when the body is empty)."""

    __slots__ = ("head", "body", "num_vars", "_body_terms")

    def __init__(self, head: Term, body: Sequence[Literal] = ()):
        if not isinstance(head, (Atom, Compound)):
            raise ValueError(f"clause head must be an atom or compound: {render_term(head)}")
        self.head = head
        self.body = tuple(body)
        n = sum(1 for _ in term_vars(head))
        for lit in self.body:
            n += sum(1 for _ in term_vars(lit.goal))
        self.num_vars = n
        self._body_terms: Optional[Tuple[Term, ...]] = None

    @property
    def is_fact(self) -> bool:
        return not self.body

    @property
    def is_ground(self) -> bool:
        return self.num_vars == 0

    def body_terms(self) -> Tuple[Term, ...]:
        if self._body_terms is None:
            self._body_terms = tuple(lit.term() for lit in self.body)
        return self._body_terms

    def __eq__(self, other):
        return (
            isinstance(other, Clause)
            and other.head == self.head
            and other.body == self.body
        )

    def __hash__(self):
        return hash((self.head, self.body))

    def __repr__(self):
        return f"Clause({render_clause(self)!r})"


def unsafe_negation_var(clause: Clause) -> Optional[Var]:
    """First variable in a negated literal not bound earlier, or None.

    A negated literal is safe when every variable in it already occurs in
    the head or in a preceding positive literal. Anonymous variables are
    never bound earlier, so any ``_`` under negation is unsafe.
    """
    seen = {v.key for v in term_vars(clause.head) if not v.is_anonymous}
    for lit in clause.body:
        if lit.negated:
            for v in term_vars(lit.goal):
                if v.is_anonymous or v.key not in seen:
                    return v
        else:
            seen.update(v.key for v in term_vars(lit.goal))
    return None


def check_clause_safety(clause: Clause) -> None:
    bad = unsafe_negation_var(clause)
    if bad is not None:
        raise UnsafeNegationError(bad.name, clause=render_clause(clause))


Ranges = Tuple[Tuple[int, int], ...]


class Program:
    """An ordered clause list with section partitions and a predicate index.

    Programs are immutable after construction; the engine may be queried
    from multiple threads concurrently.
    """

    __slots__ = ("clauses", "partitions", "_index")

    def __init__(
        self,
        clauses: Iterable[Clause],
        partitions: Optional[Dict[str, Ranges]] = None,
    ):
        self.clauses = tuple(clauses)
        if partitions is None:
            partitions = (
                {RULES: ((0, len(self.clauses)),)} if self.clauses else {}
            )
        self.partitions = {
            tag: tuple(tuple(r) for r in ranges)
            for tag, ranges in partitions.items()
            if ranges
        }
        self._check_partitions()
        self._index = _build_index(self.clauses)

    def _check_partitions(self) -> None:
        covered = []
        for tag, ranges in self.partitions.items():
            if tag not in PARTITION_TAGS:
                raise ValueError(f"unknown partition tag: {tag}")
            for start, end in ranges:
                if not (0 <= start <= end <= len(self.clauses)):
                    raise ValueError(f"partition range out of bounds: {(start, end)}")
                covered.append((start, end, tag))
        covered.sort()
        pos = 0
        for start, end, _tag in covered:
            if start < pos:
                raise ValueError("partition ranges overlap")
            if start > pos:
                raise ValueError(f"clauses {pos}..{start} not covered by any partition")
            pos = end
        if pos != len(self.clauses):
            raise ValueError(f"clauses {pos}.. not covered by any partition")

    @classmethod
    def from_sections(
        cls,
        facts: Sequence[Clause] = (),
        rules: Sequence[Clause] = (),
        actions: Sequence[Clause] = (),
    ) -> "Program":
        clauses = list(facts) + list(rules) + list(actions)
        partitions: Dict[str, Ranges] = {}
        pos = 0
        for tag, block in ((FACTS, facts), (RULES, rules), (ACTIONS, actions)):
            if block:
                partitions[tag] = ((pos, pos + len(block)),)
                pos += len(block)
        return cls(clauses, partitions)

    def section(self, tag: str) -> Tuple[Clause, ...]:
        out = []
        for start, end in self.partitions.get(tag, ()):
            out.extend(self.clauses[start:end])
        return tuple(out)

    def tag_of(self, index: int) -> str:
        for tag, ranges in self.partitions.items():
            for start, end in ranges:
                if start <= index < end:
                    return tag
        raise IndexError(index)

    def predicates(self) -> set[tuple[str, int]]:
        return set(self._index.keys())

    def candidates(self, functor: str, arity: int, first_key=None):
        idx = self._index.get((functor, arity))
        if idx is None:
            return ()
        if arity == 0 or first_key is None:
            return idx.all_clauses
        bucket = idx.by_key.get(first_key)
        if bucket is not None:
            return bucket
        return idx.generic

    def extended(self, clauses: Sequence[Clause], tag: str = RULES) -> "Program":
        """A new program with extra clauses appended under one partition tag."""
        merged = dict(self.partitions)
        n = len(self.clauses)
        if clauses:
            merged[tag] = merged.get(tag, ()) + ((n, n + len(clauses)),)
        return Program(self.clauses + tuple(clauses), merged)

    def __eq__(self, other):
        return (
            isinstance(other, Program)
            and other.clauses == self.clauses
            and other.partitions == self.partitions
        )

    def __len__(self):
        return len(self.clauses)

    def __repr__(self):
        return f"Program({len(self.clauses)} clauses)"


class _PredIndex:
    """First-argument dispatch: constant keys map to pre-merged clause lists."""

    __slots__ = ("all_clauses", "by_key", "generic")

    def __init__(self, entries):
        # entries: list of (key-or-None, clause) in source order
        self.all_clauses = tuple(c for _k, c in entries)
        generic_rows = []  # (position, clause) for var/compound first args
        specific = {}
        for pos, (key, clause) in enumerate(entries):
            if key is None:
                generic_rows.append((pos, clause))
            else:
                specific.setdefault(key, []).append((pos, clause))
        self.generic = tuple(c for _p, c in generic_rows)
        self.by_key = {}
        for key, rows in specific.items():
            if generic_rows:
                merged = []
                gi = ri = 0
                while gi < len(generic_rows) and ri < len(rows):
                    if generic_rows[gi][0] < rows[ri][0]:
                        merged.append(generic_rows[gi][1])
                        gi += 1
                    else:
                        merged.append(rows[ri][1])
                        ri += 1
                merged.extend(c for _p, c in generic_rows[gi:])
                merged.extend(c for _p, c in rows[ri:])
                self.by_key[key] = tuple(merged)
            else:
                self.by_key[key] = tuple(c for _p, c in rows)


def _first_arg_key(term: Term):
    tt = type(term)
    if tt is Atom:
        return ("a", term.name)
    if tt is Var:
        return None
    if tt is Compound or type(term).__name__ == "ListTerm":
        return None
    # Num, Str
    try:
        return ("k", type(term).__name__, term.value)  # type: ignore[union-attr]
    except AttributeError:
        return None


def _build_index(clauses: Sequence[Clause]):
    grouped: Dict[tuple[str, int], list] = {}
    for clause in clauses:
        head = clause.head
        if type(head) is Atom:
            key = (head.name, 0)
            first = None
        else:
            key = (head.functor, len(head.args))  # type: ignore[union-attr]
            first = _first_arg_key(head.args[0])  # type: ignore[union-attr]
        grouped.setdefault(key, []).append((first, clause))
    return {k: _PredIndex(v) for k, v in grouped.items()}


def goal_index_key(goal: Term, walked_first: Optional[Term]):
    if walked_first is None:
        return None
    return _first_arg_key(walked_first)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_clause(clause: Clause) -> str:
    head = render_term(clause.head)
    if clause.is_fact:
        return f"{head}."
    body = ", ".join(render_term(lit.term()) for lit in clause.body)
    return f"{head} :- {body}."


def render_program(program: Program) -> str:
    """Emit ABL source with a section marker at each partition boundary."""
    lines = []
    current_tag = None
    for i, clause in enumerate(program.clauses):
        tag = program.tag_of(i)
        if tag != current_tag:
            lines.append(f"% SECTION: {SECTION_NAMES[tag]}")
            current_tag = tag
        lines.append(render_clause(clause))
    return "\n".join(lines) + ("\n" if lines else "")
