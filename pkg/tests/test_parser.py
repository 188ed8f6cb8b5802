"""ABL source parsing: grammar, partitions, errors, round-trip."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autobus.logic import (
    ACTIONS,
    FACTS,
    RULES,
    Atom,
    Clause,
    Compound,
    Literal,
    Num,
    ParseError,
    Program,
    Str,
    UnsafeNegationError,
    Var,
    parse_clause,
    parse_program,
    parse_term,
    render_program,
)


def test_single_fact():
    p = parse_program("consumer(c123).")
    assert len(p) == 1
    assert p.clauses[0] == Clause(Compound("consumer", [Atom("c123")]))
    assert p.clauses[0].is_fact


def test_empty_source_is_empty_program():
    p = parse_program("")
    assert len(p) == 0
    assert p.partitions == {}


def test_rule_with_two_positive_literals():
    p = parse_program("active_subscription(S):- has_status(S, active), subscribe(_, S).")
    clause = p.clauses[0]
    assert isinstance(clause.head, Compound) and len(clause.head.args) == 1
    assert len(clause.body) == 2
    assert not any(lit.negated for lit in clause.body)


def test_clause_order_preserved():
    p = parse_program("a(1). a(2). b(x) :- a(X).")
    heads = [c.head for c in p.clauses]
    assert heads[0] == Compound("a", [Num(1)])
    assert heads[1] == Compound("a", [Num(2)])


def test_section_markers_partition_clauses():
    src = """
% SECTION: facts
f(a).
f(b).
% SECTION: rules
g(X) :- f(X).
% SECTION: actions
invoke(t, p(X)) :- g(X).
"""
    p = parse_program(src)
    assert p.partitions == {
        FACTS: ((0, 2),),
        RULES: ((2, 3),),
        ACTIONS: ((3, 4),),
    }
    assert [c.head.functor for c in p.section(ACTIONS)] == ["invoke"]


def test_unmarked_source_goes_to_task_rules():
    p = parse_program("f(a). g(b).")
    assert p.partitions == {RULES: ((0, 2),)}


def test_comments_are_ignored():
    p = parse_program("% a comment\nf(a). % trailing\n% another\n")
    assert len(p) == 1


def test_paper_style_space_before_period():
    p = parse_program("resolved(I) :- outcome(I, resolved) .")
    assert len(p.clauses[0].body) == 1


def test_anonymous_vars_are_distinct():
    clause = parse_clause("p(_, _).")
    keys = {v.key for v in clause.head.args}
    assert len(keys) == 2
    assert all(v.name == "_" for v in clause.head.args)


def test_named_var_shared_within_clause():
    clause = parse_clause("p(X, X) :- q(X).")
    a, b = clause.head.args
    assert a is b or a == b


def test_negation_literal():
    clause = parse_clause("p(X) :- q(X), not(r(X)).")
    assert clause.body[1].negated
    assert clause.body[1].goal == Compound("r", [Var("X")])


def test_unsafe_negation_rejected_with_variable_name():
    with pytest.raises(UnsafeNegationError) as exc:
        parse_program("p(X) :- not(q(Y)), r(X).")
    assert exc.value.variable == "Y"


def test_unsafe_negation_anonymous_rejected():
    with pytest.raises(UnsafeNegationError):
        parse_program("p(X) :- r(X), not(q(_)).")


def test_safe_negation_accepted():
    p = parse_program("p(X) :- r(X), not(q(X)).")
    assert p.clauses[0].body[1].negated


def test_numbers_int_vs_float():
    assert parse_term("4") == Num(4)
    assert parse_term("4.0") == Num(4.0)
    assert parse_term("4") != parse_term("4.0")
    assert parse_term("-3") == Num(-3)
    assert parse_term("1.5e-8") == Num(1.5e-8)


def test_strings():
    assert parse_term('"hello world"') == Str("hello world")
    assert parse_term('"a \\"quote\\""') == Str('a "quote"')


def test_lists():
    assert parse_term("[]") == Atom("[]")
    t = parse_term("[1, 2 | T]")
    assert [i.value for i in t.items] == [1, 2]
    assert t.tail == Var("T")


def test_comparison_operators():
    for op in (">=", ">", "=<", "<", "==", "!="):
        t = parse_term(f"X {op} 4")
        assert isinstance(t, Compound) and t.functor == op


def test_operator_precedence():
    t = parse_term("1 + 2 * 3")
    assert t == Compound("+", [Num(1), Compound("*", [Num(2), Num(3)])])
    t = parse_term("X >= 1 + 2")
    assert t.functor == ">=" and t.args[1].functor == "+"


def test_syntax_error_reports_position():
    with pytest.raises(ParseError) as exc:
        parse_program("consumer(c123)\nconsumer(c4).")
    assert exc.value.line == 2
    with pytest.raises(ParseError) as exc:
        parse_program("f(@).")
    assert "@" in str(exc.value)


def test_head_must_be_callable():
    with pytest.raises(ParseError):
        parse_program("X :- a.")
    with pytest.raises(ParseError):
        parse_program("4.")
    with pytest.raises(ParseError):
        parse_program("X >= 4 :- a.")


def test_parse_term_rejects_trailing_input():
    with pytest.raises(ParseError):
        parse_term("f(a) g(b)")


def test_roundtrip_handwritten():
    src = """
% SECTION: facts
consumer(c123).
subscription(s456).
monthly_rate(s456, 12.5).
% SECTION: rules
good(S) :- monthly_rate(S, R), R >= 10.0.
listy(L) :- findall(X, consumer(X), L).
neg(S) :- subscription(S), not(bad(S)).
% SECTION: actions
invoke(notify, msg(S, "hi")) :- good(S).
"""
    once = parse_program(src)
    again = parse_program(render_program(once))
    assert once == again
    assert render_program(once) == render_program(again)


# -- random round-trip -------------------------------------------------------

_atom_names = st.from_regex(r"[a-z][a-z0-9_]{0,4}", fullmatch=True)
_var_names = st.from_regex(r"[A-Z][A-Z0-9]{0,2}", fullmatch=True)


def _args():
    return st.one_of(
        _atom_names.map(Atom),
        _var_names.map(Var),
        st.integers(-50, 50).map(Num),
    )


_facts = st.builds(
    lambda name, args: Clause(Compound(name, args)),
    _atom_names,
    st.lists(st.one_of(_atom_names.map(Atom), st.integers(-50, 50).map(Num)), min_size=1, max_size=3),
)
_rules = st.builds(
    lambda hname, hargs, body: Clause(
        Compound(hname, hargs),
        [Literal(Compound(n, a)) for n, a in body],
    ),
    _atom_names,
    st.lists(_args(), min_size=1, max_size=2),
    st.lists(
        st.tuples(_atom_names, st.lists(_args(), min_size=1, max_size=3)),
        min_size=1,
        max_size=3,
    ),
)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(_facts, _rules), max_size=8))
def test_roundtrip_random_programs(clauses):
    program = Program(clauses)
    assert parse_program(render_program(program)) == program
