"""Tokenizer and recursive-descent parser for ABL source text.

Grammar sketch (clauses end with a period; ``%`` starts a line comment):

    program     :=  (section-marker | clause)*
    clause      :=  head ( ":-" literal ("," literal)* )? "."
    literal     :=  "not" "(" goal ")"  |  expression
    expression  :=  additive (CMP additive)?          CMP: >= > =< < == !=
    additive    :=  multiplicative (("+"|"-") multiplicative)*
    multiplicative := unary (("*"|"/") unary)*
    unary       :=  "-" unary | primary
    primary     :=  number | string | variable | list | "(" expression ")"
                 |  atom ( "(" expression ("," expression)* ")" )?
    list        :=  "[]" | "[" expression ("," expression)* ("|" expression)? "]"

Section markers are magic comments (``% SECTION: facts`` / ``rules`` /
``actions``) that assign the clauses that follow to a program partition.
Unmarked clauses land in the task_rules partition. Each ``_`` is a fresh
anonymous variable; its internal key is numbered per clause so reparsing
rendered output reproduces an identical program.
"""

from __future__ import annotations

import re
from typing import List, Optional, Tuple

from autobus.logic.clauses import (
    RULES,
    SECTION_TAGS,
    Clause,
    Literal,
    Program,
    check_clause_safety,
)
from autobus.logic.errors import ParseError
from autobus.logic.terms import (
    ARITH_OPS,
    COMPARISON_OPS,
    EMPTY_LIST,
    Atom,
    Compound,
    Num,
    Str,
    Term,
    Var,
    make_list,
)

_SECTION_RE = re.compile(r"%\s*SECTION:\s*(facts|rules|actions)\s*\Z")
_TOKEN_SPEC = [
    ("WS", re.compile(r"[ \t\r]+")),
    ("NL", re.compile(r"\n")),
    ("COMMENT", re.compile(r"%[^\n]*")),
    ("NUM", re.compile(r"\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+")),
    ("ATOM", re.compile(r"[a-z][a-zA-Z0-9_]*")),
    ("VAR", re.compile(r"[A-Z_][a-zA-Z0-9_]*")),
    ("STR", re.compile(r'"(?:[^"\\\n]|\\.)*"')),
    ("IMPLIES", re.compile(r":-")),
    ("OP", re.compile(r">=|=<|==|!=|>|<|\+|-|\*|/")),
    ("PUNCT", re.compile(r"[()\[\]|,.]")),
]


class Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind: str, text: str, line: int, column: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.column = column

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.column})"


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)
    while pos < n:
        for kind, pattern in _TOKEN_SPEC:
            m = pattern.match(source, pos)
            if not m:
                continue
            text = m.group()
            col = pos - line_start + 1
            if kind == "NL":
                line += 1
                line_start = pos + 1
            elif kind == "COMMENT":
                sect = _SECTION_RE.match(text)
                if sect:
                    tokens.append(Token("SECTION", sect.group(1), line, col))
            elif kind != "WS":
                tokens.append(Token(kind, text, line, col))
            pos = m.end()
            break
        else:
            col = pos - line_start + 1
            raise ParseError("unexpected character", line, col, source[pos])
    tokens.append(Token("EOF", "", line, n - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0
        self.clause_vars: dict[str, Var] = {}
        self.anon_count = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column, tok.text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            self.error(f"expected {want!r}")
        return self.advance()

    # -- program ------------------------------------------------------------

    def parse_program(self) -> Program:
        clauses: List[Clause] = []
        tagged: List[str] = []
        current_tag = RULES
        while self.peek().kind != "EOF":
            if self.peek().kind == "SECTION":
                current_tag = SECTION_TAGS[self.advance().text]
                continue
            clauses.append(self.parse_clause())
            tagged.append(current_tag)
        partitions: dict[str, tuple] = {}
        start = 0
        for i in range(len(clauses) + 1):
            boundary = i == len(clauses) or (i > 0 and tagged[i] != tagged[i - 1])
            if i > 0 and boundary:
                tag = tagged[i - 1]
                partitions[tag] = partitions.get(tag, ()) + ((start, i),)
                start = i
        return Program(clauses, partitions if clauses else None)

    def parse_clause(self) -> Clause:
        self.clause_vars = {}
        self.anon_count = 0
        head_tok = self.peek()
        head = self.expression()
        if not isinstance(head, (Atom, Compound)) or (
            isinstance(head, Compound) and head.functor in COMPARISON_OPS + ARITH_OPS
        ):
            self.error("clause head must be an atom or compound term", head_tok)
        body: List[Literal] = []
        if self.peek().kind == "IMPLIES":
            self.advance()
            body.append(self.literal())
            while self.peek().kind == "PUNCT" and self.peek().text == ",":
                self.advance()
                body.append(self.literal())
        self.expect("PUNCT", ".")
        clause = Clause(head, body)
        check_clause_safety(clause)
        return clause

    # -- literals and expressions --------------------------------------------

    def literal(self) -> Literal:
        tok = self.peek()
        term = self.expression()
        if isinstance(term, Compound) and term.functor == "not" and len(term.args) == 1:
            goal = term.args[0]
            if not isinstance(goal, (Atom, Compound)):
                self.error("negated goal must be an atom or compound term", tok)
            return Literal(goal, negated=True)
        if not isinstance(term, (Atom, Compound)):
            self.error("body literal must be an atom or compound term", tok)
        return Literal(term)

    def expression(self) -> Term:
        left = self.additive()
        tok = self.peek()
        if tok.kind == "OP" and tok.text in COMPARISON_OPS:
            self.advance()
            right = self.additive()
            return Compound(tok.text, [left, right])
        return left

    def additive(self) -> Term:
        left = self.multiplicative()
        while self.peek().kind == "OP" and self.peek().text in ("+", "-"):
            op = self.advance().text
            right = self.multiplicative()
            left = Compound(op, [left, right])
        return left

    def multiplicative(self) -> Term:
        left = self.unary()
        while self.peek().kind == "OP" and self.peek().text in ("*", "/"):
            op = self.advance().text
            right = self.unary()
            left = Compound(op, [left, right])
        return left

    def unary(self) -> Term:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "-":
            self.advance()
            inner = self.unary()
            if isinstance(inner, Num):
                return Num(-inner.value)
            self.error("unary minus applies only to numeric literals", tok)
        return self.primary()

    def primary(self) -> Term:
        tok = self.peek()
        if tok.kind == "NUM":
            self.advance()
            is_float = "." in tok.text or "e" in tok.text or "E" in tok.text
            return Num(float(tok.text) if is_float else int(tok.text))
        if tok.kind == "STR":
            self.advance()
            raw = tok.text[1:-1]
            return Str(raw.replace('\\"', '"').replace("\\n", "\n").replace("\\t", "\t").replace("\\\\", "\\"))
        if tok.kind == "VAR":
            self.advance()
            return self.make_var(tok.text)
        if tok.kind == "ATOM":
            self.advance()
            if self.peek().kind == "PUNCT" and self.peek().text == "(":
                self.advance()
                args = [self.expression()]
                while self.peek().kind == "PUNCT" and self.peek().text == ",":
                    self.advance()
                    args.append(self.expression())
                self.expect("PUNCT", ")")
                return Compound(tok.text, args)
            return Atom(tok.text)
        if tok.kind == "PUNCT" and tok.text == "(":
            self.advance()
            inner = self.expression()
            self.expect("PUNCT", ")")
            return inner
        if tok.kind == "PUNCT" and tok.text == "[":
            return self.list_term()
        self.error("expected a term")

    def list_term(self) -> Term:
        self.expect("PUNCT", "[")
        if self.peek().kind == "PUNCT" and self.peek().text == "]":
            self.advance()
            return EMPTY_LIST
        items = [self.expression()]
        while self.peek().kind == "PUNCT" and self.peek().text == ",":
            self.advance()
            items.append(self.expression())
        tail: Term = EMPTY_LIST
        if self.peek().kind == "PUNCT" and self.peek().text == "|":
            self.advance()
            tail = self.expression()
        self.expect("PUNCT", "]")
        return make_list(items, tail)

    def make_var(self, name: str) -> Var:
        if name == "_":
            self.anon_count += 1
            return Var("_", f"_#{self.anon_count}")
        var = self.clause_vars.get(name)
        if var is None:
            var = Var(name)
            self.clause_vars[name] = var
        return var


def parse_program(source: str) -> Program:
    """Parse ABL source into a Program (clause order = source order)."""
    return _Parser(tokenize(source)).parse_program()


def parse_clause(source: str) -> Clause:
    parser = _Parser(tokenize(source))
    clause = parser.parse_clause()
    if parser.peek().kind != "EOF":
        parser.error("trailing input after clause")
    return clause


def parse_term(source: str) -> Term:
    """Parse a single term (no trailing period), e.g. a query goal."""
    parser = _Parser(tokenize(source))
    term = parser.expression()
    if parser.peek().kind != "EOF":
        parser.error("trailing input after term")
    return term
