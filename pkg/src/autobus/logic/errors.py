"""Error types raised by the ABL parser and engine.

Failure to prove a goal is never an exception — the solver just yields
nothing. Exceptions mark conditions the caller must not confuse with
failure: bad syntax, unsafe negation, exhausted depth, and type errors
in arithmetic.
"""

from __future__ import annotations

from typing import Optional


class LogicError(Exception):
    """Base for everything raised by the logic layer."""


class ParseError(LogicError):
    def __init__(self, message: str, line: int, column: int, token: str = ""):
        self.line = line
        self.column = column
        self.token = token
        where = f"line {line}, column {column}"
        if token:
            where += f" at {token!r}"
        super().__init__(f"{message} ({where})")


class UnsafeNegationError(LogicError):
    """A negated literal uses a variable not bound by an earlier positive goal."""

    def __init__(self, variable: str, clause: Optional[str] = None):
        self.variable = variable
        self.clause = clause
        msg = f"unsafe negation: variable {variable!r} is not bound before the negated goal"
        if clause:
            msg += f" in {clause}"
        super().__init__(msg)


class EngineError(LogicError):
    """Base for solver runtime errors."""


class DepthLimitExceeded(EngineError):
    def __init__(self, max_depth: int):
        self.max_depth = max_depth
        super().__init__(f"resolution depth limit exceeded ({max_depth})")


class NongroundNegationError(EngineError):
    def __init__(self, variable: str, goal: str):
        self.variable = variable
        self.goal = goal
        super().__init__(
            f"negated goal {goal} is not ground: variable {variable!r} unbound"
        )


class ArithmeticTypeError(EngineError):
    def __init__(self, operand: str):
        self.operand = operand
        super().__init__(f"operand does not evaluate to a number: {operand}")


class DivisionByZero(EngineError):
    def __init__(self):
        super().__init__("division by zero")


class UnboundGoalError(EngineError):
    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"goal is an unbound variable: {variable!r}")
