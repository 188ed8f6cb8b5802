"""ABL: terms, parser, and SLD resolution engine."""

from autobus.logic.clauses import (
    ACTIONS,
    FACTS,
    PARTITION_TAGS,
    RULES,
    Clause,
    Literal,
    Program,
    check_clause_safety,
    render_clause,
    render_program,
    unsafe_negation_var,
)
from autobus.logic.engine import (
    DEFAULT_LIMITS,
    SolveLimits,
    eval_arith,
    is_derivable,
    solve,
    solve_all,
    unify,
)
from autobus.logic.errors import (
    ArithmeticTypeError,
    DepthLimitExceeded,
    DivisionByZero,
    EngineError,
    LogicError,
    NongroundNegationError,
    ParseError,
    UnboundGoalError,
    UnsafeNegationError,
)
from autobus.logic.parser import parse_clause, parse_program, parse_term
from autobus.logic.terms import (
    EMPTY_LIST,
    Atom,
    Compound,
    ListTerm,
    Num,
    Str,
    Substitution,
    Term,
    Var,
    functor_arity,
    is_atom_name,
    is_ground,
    make_list,
    render_term,
    term_vars,
)

__all__ = [
    "ACTIONS",
    "FACTS",
    "PARTITION_TAGS",
    "RULES",
    "Atom",
    "ArithmeticTypeError",
    "Clause",
    "Compound",
    "DEFAULT_LIMITS",
    "DepthLimitExceeded",
    "DivisionByZero",
    "EMPTY_LIST",
    "EngineError",
    "ListTerm",
    "Literal",
    "LogicError",
    "NongroundNegationError",
    "Num",
    "ParseError",
    "Program",
    "SolveLimits",
    "Str",
    "Substitution",
    "Term",
    "UnboundGoalError",
    "UnsafeNegationError",
    "Var",
    "check_clause_safety",
    "eval_arith",
    "functor_arity",
    "is_atom_name",
    "is_derivable",
    "is_ground",
    "make_list",
    "parse_clause",
    "parse_program",
    "parse_term",
    "render_clause",
    "render_program",
    "render_term",
    "solve",
    "solve_all",
    "term_vars",
    "unify",
    "unsafe_negation_var",
]
