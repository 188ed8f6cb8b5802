"""Term representation for ABL, plus substitutions and rendering.

A term is one of: Atom, Var, Num (tagged int/float), Str, Compound, or
ListTerm. Terms are immutable and hashable; the engine compares them
structurally. Plain classes with __slots__ are used instead of dataclasses
because term creation and comparison dominate solver time.
"""

from __future__ import annotations

import re
from typing import Iterable, Iterator, Mapping, Optional, Union

ATOM_RE = re.compile(r"[a-z][a-zA-Z0-9_]*\Z")
VAR_RE = re.compile(r"[A-Z_][a-zA-Z0-9_]*\Z")

# Infix operators the parser accepts and the renderer emits. Values are
# binding strengths (higher binds tighter).
COMPARISON_OPS = (">=", ">", "=<", "<", "==", "!=")
ARITH_OPS = ("+", "-", "*", "/")
_PRECEDENCE = {op: 1 for op in COMPARISON_OPS}
_PRECEDENCE.update({"+": 2, "-": 2, "*": 3, "/": 3})


class Term:
    __slots__ = ()


class Atom(Term):
    __slots__ = ("name", "_hash")

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("a", name))

    def __eq__(self, other):
        return self is other or (type(other) is Atom and other.name == self.name)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Atom({self.name!r})"


class Var(Term):
    """A logic variable.

    ``name`` is the display form ("_" for anonymous variables); ``key`` is
    the identity the engine binds against. Distinct anonymous variables
    share the display name but carry distinct keys.
    """

    __slots__ = ("name", "key")

    def __init__(self, name: str, key: Optional[str] = None):
        self.name = name
        self.key = key if key is not None else name

    @property
    def is_anonymous(self) -> bool:
        return self.name == "_"

    def __eq__(self, other):
        return self is other or (type(other) is Var and other.key == self.key)

    def __hash__(self):
        return hash(("v", self.key))

    def __repr__(self):
        return f"Var({self.key!r})"


class Num(Term):
    """Numeric constant; the int/float tag is the Python type of ``value``."""

    __slots__ = ("value", "_hash")

    def __init__(self, value: Union[int, float]):
        self.value = value
        self._hash = hash(("n", type(value).__name__, value))

    def __eq__(self, other):
        return self is other or (
            type(other) is Num
            and type(other.value) is type(self.value)
            and other.value == self.value
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Num({self.value!r})"


class Str(Term):
    __slots__ = ("value", "_hash")

    def __init__(self, value: str):
        self.value = value
        self._hash = hash(("s", value))

    def __eq__(self, other):
        return self is other or (type(other) is Str and other.value == self.value)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Str({self.value!r})"


class Compound(Term):
    __slots__ = ("functor", "args", "_hash")

    def __init__(self, functor: str, args: Iterable[Term]):
        self.functor = functor
        self.args = tuple(args)
        if not self.args:
            raise ValueError("compound terms need at least one argument")
        self._hash = hash(("c", functor, self.args))

    def __eq__(self, other):
        return self is other or (
            type(other) is Compound
            and other._hash == self._hash
            and other.functor == self.functor
            and other.args == self.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Compound({self.functor!r}, {list(self.args)!r})"


EMPTY_LIST = Atom("[]")


class ListTerm(Term):
    """A partial list: fixed ``items`` followed by ``tail``.

    Canonical form keeps at least one item and never nests another
    ListTerm in the tail; use :func:`make_list` to build one.
    """

    __slots__ = ("items", "tail", "_hash")

    def __init__(self, items: Iterable[Term], tail: Term = EMPTY_LIST):
        self.items = tuple(items)
        self.tail = tail
        if not self.items:
            raise ValueError("use EMPTY_LIST for the empty list")
        if type(tail) is ListTerm:
            raise ValueError("list tail must not itself be a ListTerm")
        self._hash = hash(("l", self.items, tail))

    def __eq__(self, other):
        return self is other or (
            type(other) is ListTerm
            and other._hash == self._hash
            and other.items == self.items
            and other.tail == self.tail
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"ListTerm({list(self.items)!r}, {self.tail!r})"


def make_list(items: Iterable[Term], tail: Term = EMPTY_LIST) -> Term:
    """Build a list term in canonical (spliced) form."""
    items = tuple(items)
    while type(tail) is ListTerm:
        items = items + tail.items
        tail = tail.tail
    if not items:
        return tail
    return ListTerm(items, tail)


def is_atom_name(text: str) -> bool:
    return bool(ATOM_RE.match(text))


def is_var_name(text: str) -> bool:
    return bool(VAR_RE.match(text))


def term_vars(term: Term) -> Iterator[Var]:
    """Yield every variable occurrence, left to right (with repeats)."""
    stack = [term]
    while stack:
        t = stack.pop()
        tt = type(t)
        if tt is Var:
            yield t
        elif tt is Compound:
            stack.extend(reversed(t.args))
        elif tt is ListTerm:
            stack.append(t.tail)
            stack.extend(reversed(t.items))


def is_ground(term: Term) -> bool:
    for _ in term_vars(term):
        return False
    return True


def functor_arity(term: Term) -> tuple[str, int]:
    """Predicate indicator of a callable term (Atom or Compound)."""
    if type(term) is Atom:
        return term.name, 0
    if type(term) is Compound:
        return term.functor, len(term.args)
    raise TypeError(f"not a callable term: {render_term(term)}")


# ---------------------------------------------------------------------------
# Substitutions
# ---------------------------------------------------------------------------


class Substitution:
    """An immutable binding map from variable keys to terms.

    ``apply`` fully resolves chains, so applying a substitution twice gives
    the same result as applying it once.
    """

    __slots__ = ("bindings",)

    def __init__(self, bindings: Optional[Mapping[str, Term]] = None):
        self.bindings = dict(bindings) if bindings else {}

    def apply(self, term: Term) -> Term:
        return resolve(term, self.bindings)

    def get(self, name: str) -> Optional[Term]:
        t = self.bindings.get(name)
        return resolve(t, self.bindings) if t is not None else None

    def items(self):
        return self.bindings.items()

    def __eq__(self, other):
        return isinstance(other, Substitution) and other.bindings == self.bindings

    def __len__(self):
        return len(self.bindings)

    def __repr__(self):
        inner = ", ".join(f"{k} -> {render_term(v)}" for k, v in self.bindings.items())
        return "{" + inner + "}"


EMPTY_SUBST = Substitution()


def walk(term: Term, bindings: Mapping[str, Term]) -> Term:
    """Follow variable bindings until a non-variable or unbound variable."""
    while type(term) is Var:
        bound = bindings.get(term.key)
        if bound is None:
            return term
        term = bound
    return term


def resolve(term: Term, bindings: Mapping[str, Term]) -> Term:
    """Deep-apply bindings, returning the original object when unchanged."""
    term = walk(term, bindings)
    tt = type(term)
    if tt is Compound:
        new_args = None
        for i, a in enumerate(term.args):
            r = resolve(a, bindings)
            if r is not a and new_args is None:
                new_args = list(term.args[:i])
            if new_args is not None:
                new_args.append(r)
        return term if new_args is None else Compound(term.functor, new_args)
    if tt is ListTerm:
        items = [resolve(a, bindings) for a in term.items]
        tail = resolve(term.tail, bindings)
        if tail is term.tail and all(a is b for a, b in zip(items, term.items)):
            return term
        return make_list(items, tail)
    return term


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _render_num(value: Union[int, float]) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(value)


def render_term(term: Term, _parent_prec: int = 0) -> str:
    tt = type(term)
    if tt is Atom:
        return term.name
    if tt is Var:
        return term.name
    if tt is Num:
        return _render_num(term.value)
    if tt is Str:
        escaped = term.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if tt is ListTerm:
        inner = ", ".join(render_term(i) for i in term.items)
        if term.tail == EMPTY_LIST:
            return f"[{inner}]"
        return f"[{inner} | {render_term(term.tail)}]"
    if tt is Compound:
        prec = _PRECEDENCE.get(term.functor)
        if prec is not None and len(term.args) == 2:
            left = render_term(term.args[0], prec)
            right = render_term(term.args[1], prec + 1)
            text = f"{left} {term.functor} {right}"
            if prec < _parent_prec:
                return f"({text})"
            return text
        inner = ", ".join(render_term(a) for a in term.args)
        return f"{term.functor}({inner})"
    raise TypeError(f"not a term: {term!r}")
