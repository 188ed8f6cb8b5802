"""SLD resolution over ABL programs.

Proof search is top-down with leftmost literal selection; clauses are
tried in source order, so solutions replay deterministically. Negation is
negation-as-failure restricted to ground goals. Comparisons evaluate both
sides arithmetically and require numbers.

The depth limit counts rule expansions along the current derivation path;
exceeding it raises DepthLimitExceeded rather than failing silently.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Union

from autobus.logic.clauses import Clause, Program
from autobus.logic.errors import (
    ArithmeticTypeError,
    DepthLimitExceeded,
    DivisionByZero,
    NongroundNegationError,
    UnboundGoalError,
)
from autobus.logic.terms import (
    Atom,
    Compound,
    EMPTY_LIST,
    ListTerm,
    Num,
    Str,
    Substitution,
    Term,
    Var,
    make_list,
    render_term,
    resolve,
    term_vars,
    walk,
)

Bindings = Dict[str, Term]

COMPARATORS = {
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "=<": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


@dataclass(frozen=True)
class SolveLimits:
    max_depth: int = 512
    max_solutions: Optional[int] = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_solutions is not None and self.max_solutions < 1:
            raise ValueError("max_solutions must be >= 1 or None")


DEFAULT_LIMITS = SolveLimits()


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------


def _occurs(key: str, term: Term, bindings: Bindings) -> bool:
    stack = [term]
    while stack:
        t = walk(stack.pop(), bindings)
        tt = type(t)
        if tt is Var:
            if t.key == key:
                return True
        elif tt is Compound:
            stack.extend(t.args)
        elif tt is ListTerm:
            stack.append(t.tail)
            stack.extend(t.items)
    return False


def unify_bindings(a: Term, b: Term, bindings: Bindings) -> Optional[Bindings]:
    """Most general unifier extending ``bindings``, or None.

    The input dict is never mutated; a copy is made on the first new
    binding. Anonymous variables match anything without being bound (each
    occurrence is unique, so nothing can refer back to them).
    """
    stack = [(a, b)]
    out = bindings
    copied = False
    while stack:
        x, y = stack.pop()
        x = walk(x, out)
        y = walk(y, out)
        if x is y:
            continue
        tx = type(x)
        ty = type(y)
        if tx is Var:
            if ty is Var and y.key == x.key:
                continue
            if x.name == "_":
                continue
            if _occurs(x.key, y, out):
                return None
            if not copied:
                out = dict(out)
                copied = True
            out[x.key] = y
        elif ty is Var:
            if y.name == "_":
                continue
            if _occurs(y.key, x, out):
                return None
            if not copied:
                out = dict(out)
                copied = True
            out[y.key] = x
        elif tx is Atom:
            if ty is not Atom or x.name != y.name:
                return None
        elif tx is Num:
            if (
                ty is not Num
                or type(x.value) is not type(y.value)
                or x.value != y.value
            ):
                return None
        elif tx is Str:
            if ty is not Str or x.value != y.value:
                return None
        elif tx is Compound:
            if (
                ty is not Compound
                or x.functor != y.functor
                or len(x.args) != len(y.args)
            ):
                return None
            stack.extend(zip(x.args, y.args))
        elif tx is ListTerm:
            if ty is not ListTerm:
                return None
            nx, ny = len(x.items), len(y.items)
            if nx == ny:
                stack.append((x.tail, y.tail))
                stack.extend(zip(x.items, y.items))
            elif nx < ny:
                stack.append((x.tail, make_list(y.items[nx:], y.tail)))
                stack.extend(zip(x.items, y.items[:nx]))
            else:
                stack.append((make_list(x.items[ny:], x.tail), y.tail))
                stack.extend(zip(x.items[:ny], y.items))
        else:
            return None
    return out


def unify(a: Term, b: Term, subst: Optional[Substitution] = None) -> Optional[Substitution]:
    """Public unify over Substitution values (None on failure)."""
    base = subst.bindings if subst is not None else {}
    out = unify_bindings(a, b, base)
    return Substitution(out) if out is not None else None


# ---------------------------------------------------------------------------
# Arithmetic
# ---------------------------------------------------------------------------


def _eval_number(term: Term) -> Union[int, float]:
    tt = type(term)
    if tt is Num:
        return term.value
    if tt is Compound and len(term.args) == 2:
        op = term.functor
        if op in ("+", "-", "*", "/"):
            left = _eval_number(term.args[0])
            right = _eval_number(term.args[1])
            if op == "+":
                return left + right
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            if right == 0:
                raise DivisionByZero()
            return left / right
    raise ArithmeticTypeError(render_term(term))


def eval_arith(term: Term) -> Num:
    """Evaluate a ground arithmetic term to a Num.

    Integer operations stay integral except ``/``, which always yields a
    float; mixing int and float promotes to float.
    """
    return Num(_eval_number(term))


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


class _Solver:
    __slots__ = ("program", "limits", "rename_count")

    def __init__(self, program: Program, limits: SolveLimits):
        self.program = program
        self.limits = limits
        self.rename_count = 0

    def rename(self, clause: Clause) -> Clause:
        if clause.num_vars == 0:
            return clause
        self.rename_count += 1
        suffix = f"@{self.rename_count}"
        cache: Dict[str, Var] = {}

        def rn(t: Term) -> Term:
            tt = type(t)
            if tt is Var:
                got = cache.get(t.key)
                if got is None:
                    got = Var(t.name, t.key + suffix)
                    cache[t.key] = got
                return got
            if tt is Compound:
                return Compound(t.functor, [rn(a) for a in t.args])
            if tt is ListTerm:
                return make_list([rn(a) for a in t.items], rn(t.tail))
            return t

        head = rn(clause.head)
        renamed = Clause.__new__(Clause)
        renamed.head = head
        renamed.body = clause.body
        renamed.num_vars = clause.num_vars
        renamed._body_terms = tuple(rn(t) for t in clause.body_terms())
        return renamed

    def prove(self, goals: tuple, i: int, bindings: Bindings, depth: int) -> Iterator[Bindings]:
        if i == len(goals):
            yield bindings
            return
        goal = walk(goals[i], bindings)
        tg = type(goal)
        if tg is Var:
            raise UnboundGoalError(goal.name)
        if tg is not Atom and tg is not Compound:
            raise UnboundGoalError(render_term(goal))

        if tg is Compound:
            functor = goal.functor
            arity = len(goal.args)
            cmp = COMPARATORS.get(functor)
            if cmp is not None and arity == 2:
                left = _eval_number(resolve(goal.args[0], bindings))
                right = _eval_number(resolve(goal.args[1], bindings))
                if cmp(left, right):
                    yield from self.prove(goals, i + 1, bindings, depth)
                return
            if functor == "not" and arity == 1:
                inner = resolve(goal.args[0], bindings)
                for v in term_vars(inner):
                    raise NongroundNegationError(v.name, render_term(inner))
                for _sol in self.prove((inner,), 0, bindings, depth + 1):
                    return
                yield from self.prove(goals, i + 1, bindings, depth)
                return
            if functor == "findall" and arity == 3:
                template, inner, out = goal.args
                inner = walk(inner, bindings)
                if type(inner) is Var:
                    raise UnboundGoalError(inner.name)
                collected: List[Term] = []
                seen = set()
                for sol in self.prove((inner,), 0, bindings, depth + 1):
                    item = resolve(template, sol)
                    if item not in seen:
                        seen.add(item)
                        collected.append(item)
                lst = make_list(collected) if collected else EMPTY_LIST
                after = unify_bindings(out, lst, bindings)
                if after is not None:
                    yield from self.prove(goals, i + 1, after, depth)
                return
            first = walk(goal.args[0], bindings)
            key = _index_key(first)
            candidates = self.program.candidates(functor, arity, key)
        else:
            candidates = self.program.candidates(goal.name, 0)

        rest_cache = None
        for clause in candidates:
            renamed = self.rename(clause)
            after = unify_bindings(goal, renamed.head, bindings)
            if after is None:
                continue
            if renamed.body:
                if depth + 1 > self.limits.max_depth:
                    raise DepthLimitExceeded(self.limits.max_depth)
                if rest_cache is None:
                    rest_cache = goals[i + 1 :]
                yield from self.prove(
                    renamed.body_terms() + rest_cache, 0, after, depth + 1
                )
            else:
                yield from self.prove(goals, i + 1, after, depth)


def _index_key(first: Term):
    tt = type(first)
    if tt is Atom:
        return ("a", first.name)
    if tt is Num or tt is Str:
        return ("k", type(first).__name__, first.value)
    return None


def _ensure_recursion_headroom(max_depth: int) -> None:
    needed = max_depth * 8 + 2000
    if sys.getrecursionlimit() < needed:
        sys.setrecursionlimit(needed)


def solve(
    goal: Term,
    program: Program,
    limits: SolveLimits = DEFAULT_LIMITS,
) -> Iterator[Substitution]:
    """Yield one Substitution per proof of ``goal``, projected onto the
    goal's named variables and fully resolved."""
    if not isinstance(goal, (Atom, Compound)):
        raise UnboundGoalError(render_term(goal))
    _ensure_recursion_headroom(limits.max_depth)
    names = []
    seen = set()
    for v in term_vars(goal):
        if not v.is_anonymous and v.key not in seen:
            seen.add(v.key)
            names.append(v)
    solver = _Solver(program, limits)
    count = 0
    for bindings in solver.prove((goal,), 0, {}, 0):
        projected = {}
        for v in names:
            value = resolve(v, bindings)
            if not (type(value) is Var and value.key == v.key):
                projected[v.key] = value
        yield Substitution(projected)
        count += 1
        if limits.max_solutions is not None and count >= limits.max_solutions:
            return


def solve_all(
    goal: Term,
    program: Program,
    limits: SolveLimits = DEFAULT_LIMITS,
) -> List[Term]:
    """All goal instances in solution order, duplicates removed."""
    out: List[Term] = []
    seen = set()
    for subst in solve(goal, program, limits):
        instance = subst.apply(goal)
        if instance not in seen:
            seen.add(instance)
            out.append(instance)
    return out


def is_derivable(
    goal: Term,
    program: Program,
    limits: SolveLimits = DEFAULT_LIMITS,
) -> bool:
    for _ in solve(goal, program, SolveLimits(limits.max_depth, max_solutions=1)):
        return True
    return False
