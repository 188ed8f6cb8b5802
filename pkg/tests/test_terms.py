"""Term structure, substitution, and rendering."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autobus.logic import (
    EMPTY_LIST,
    Atom,
    Compound,
    ListTerm,
    Num,
    Str,
    Substitution,
    Var,
    is_ground,
    make_list,
    parse_term,
    render_term,
    term_vars,
    unify,
)


def test_atom_equality_and_hash():
    assert Atom("foo") == Atom("foo")
    assert Atom("foo") != Atom("bar")
    assert hash(Atom("foo")) == hash(Atom("foo"))


def test_num_int_float_are_distinct():
    assert Num(4) != Num(4.0)
    assert Num(4) == Num(4)
    assert Num(4.0) == Num(4.0)


def test_var_identity_is_key():
    assert Var("X") == Var("X")
    assert Var("_", "_#1") != Var("_", "_#2")
    assert Var("_", "_#1").is_anonymous


def test_compound_requires_args():
    with pytest.raises(ValueError):
        Compound("f", [])


def test_make_list_splices_nested_tails():
    inner = ListTerm([Num(2), Num(3)])
    spliced = make_list([Num(1)], inner)
    assert spliced == ListTerm([Num(1), Num(2), Num(3)])
    assert make_list([], EMPTY_LIST) == EMPTY_LIST


def test_term_vars_left_to_right():
    t = parse_term("f(X, g(Y, X), Z)")
    assert [v.name for v in term_vars(t)] == ["X", "Y", "X", "Z"]


def test_is_ground():
    assert is_ground(parse_term("f(a, 1, \"s\", [x])"))
    assert not is_ground(parse_term("f(a, X)"))


def test_render_infix_and_parens():
    assert render_term(parse_term("X >= 2 + 3 * 4")) == "X >= 2 + 3 * 4"
    assert render_term(parse_term("(1 + 2) * 3")) == "(1 + 2) * 3"
    assert render_term(parse_term("f(X + 1, [a, b | T])")) == "f(X + 1, [a, b | T])"


def test_render_string_escapes():
    assert render_term(Str('he said "hi"')) == '"he said \\"hi\\""'


def test_substitution_apply_resolves_chains():
    s = unify(parse_term("f(X, Y)"), parse_term("f(Y, a)"))
    assert s is not None
    assert s.apply(parse_term("X")) == Atom("a")


# -- property tests ---------------------------------------------------------

atoms = st.from_regex(r"[a-z][a-z0-9_]{0,4}", fullmatch=True).map(Atom)
variables = st.from_regex(r"[A-Z][A-Z0-9]{0,2}", fullmatch=True).map(Var)
nums = st.one_of(
    st.integers(-10**6, 10**6).map(Num),
    st.floats(allow_nan=False, allow_infinity=False).map(Num),
)
strings = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters='"\\\n'),
    max_size=8,
).map(Str)


def terms(max_depth=3):
    base = st.one_of(atoms, variables, nums, strings)
    return st.recursive(
        base,
        lambda children: st.one_of(
            st.builds(
                Compound,
                st.from_regex(r"[a-z][a-z0-9_]{0,4}", fullmatch=True),
                st.lists(children, min_size=1, max_size=3),
            ),
            st.builds(
                make_list,
                st.lists(children, min_size=1, max_size=3),
                st.one_of(st.just(EMPTY_LIST), variables),
            ),
        ),
        max_leaves=8,
    )


@settings(max_examples=200, deadline=None)
@given(terms())
def test_render_parse_roundtrip(term):
    assert parse_term(render_term(term)) == term


@settings(max_examples=300, deadline=None)
@given(terms(), terms())
def test_unifier_soundness(a, b):
    s = unify(a, b)
    if s is not None:
        assert s.apply(a) == s.apply(b)


@settings(max_examples=300, deadline=None)
@given(terms(), terms())
def test_substitution_idempotent(a, b):
    s = unify(a, b)
    if s is not None:
        once = s.apply(a)
        assert s.apply(once) == once
