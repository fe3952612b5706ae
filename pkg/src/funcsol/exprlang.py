"""Tiny expression language for coefficient functions.

Grammar (whitespace insignificant):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?          # '^' right associative
    unary  := '-'? atom
    atom   := number | name | name '(' expr ')' | '(' expr ')'

Numbers accept decimal and exponent forms (``1.5``, ``.5``, ``2e-3``).
``pi`` is the only builtin constant and parses directly to its value.
The callable set is fixed: sin, cos, exp, log, sqrt, abs.

Evaluation is an interpreted tree walk over numpy ufuncs, so an
environment may bind variables to floats or to same-shaped arrays and
the result broadcasts accordingly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    EvalDomainError,
    ExprSyntaxError,
    UnknownFunctionError,
    UnknownVariableError,
)

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "ExprAST"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ExprAST"
    right: "ExprAST"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "ExprAST"


ExprAST = Union[Num, Var, Neg, BinOp, Call]

_NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN_RE = re.compile(rf"({_NUMBER})|([A-Za-z_][A-Za-z_0-9]*)|(\S)")


def _tokenize(text):
    """Yield (kind, text, position) with 1-based positions."""
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        pos = m.start() + 1
        if m.group(1) is not None:
            tokens.append(("num", m.group(1), pos))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), pos))
        else:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ExprSyntaxError(f"unexpected character '{ch}'", pos)
            tokens.append((ch, ch, pos))
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, allowed_vars):
        if not text or not text.strip():
            raise ExprSyntaxError("empty expression", 1)
        self.tokens = _tokenize(text)
        self.idx = 0
        self.allowed = frozenset(allowed_vars)

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok[0] != kind:
            raise ExprSyntaxError(f"expected '{kind}', found '{tok[1] or 'end of input'}'", tok[2])
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected trailing input '{tok[1]}'", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.unary()
        if self.peek()[0] == "^":
            self.advance()
            node = BinOp("^", node, self.factor())
        return node

    def unary(self):
        if self.peek()[0] == "-":
            self.advance()
            return Neg(self.atom())
        return self.atom()

    def atom(self):
        tok = self.advance()
        kind, text, pos = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(text, pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            if text not in self.allowed:
                raise UnknownVariableError(text, pos)
            return Var(text)
        if kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"expected a value, found '{text or 'end of input'}'", pos)


def parse_expression(text: str, allowed_vars) -> ExprAST:
    """Parse ``text`` into an AST; names must come from ``allowed_vars``."""
    return _Parser(text, allowed_vars).parse()


def collect_variables(node: ExprAST) -> frozenset:
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Neg):
        return collect_variables(node.operand)
    if isinstance(node, BinOp):
        return collect_variables(node.left) | collect_variables(node.right)
    if isinstance(node, Call):
        return collect_variables(node.arg)
    return frozenset()


def _check_finite(value, what):
    if not np.all(np.isfinite(value)):
        raise EvalDomainError(f"{what} produced a non-finite value")
    return value


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnknownVariableError(node.name) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(np.asarray(b) == 0.0):
                raise EvalDomainError("division by zero")
            return a / b
        # '^'
        with np.errstate(all="ignore"):
            out = np.power(a, b)
        return _check_finite(out, "power")
    # Call
    x = _eval(node.arg, env)
    if node.func == "log" and np.any(np.asarray(x) <= 0.0):
        raise EvalDomainError("log of non-positive value")
    if node.func == "sqrt" and np.any(np.asarray(x) < 0.0):
        raise EvalDomainError("sqrt of negative value")
    with np.errstate(all="ignore"):
        out = FUNCTIONS[node.func](x)
    return _check_finite(out, node.func)


def evaluate(node: ExprAST, env):
    """Evaluate an AST over an environment of floats or numpy arrays."""
    out = _eval(node, env)
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


# Canonical rendering. parse(render(t)) is structurally identical to t for
# every parser-producible tree; the writers mirror the grammar levels so no
# precedence information is lost or invented.

def render(node: ExprAST) -> str:
    return _render_expr(node)


def _render_expr(node):
    if isinstance(node, BinOp) and node.op in "+-":
        return f"{_render_expr(node.left)}{node.op}{_render_term(node.right)}"
    return _render_term(node)


def _render_term(node):
    if isinstance(node, BinOp) and node.op in "*/":
        return f"{_render_term(node.left)}{node.op}{_render_factor(node.right)}"
    return _render_factor(node)


def _render_factor(node):
    if isinstance(node, BinOp) and node.op == "^":
        return f"{_render_unary(node.left)}^{_render_factor(node.right)}"
    return _render_unary(node)


def _render_unary(node):
    if isinstance(node, Neg):
        return f"-{_render_atom(node.operand)}"
    return _render_atom(node)


def _render_atom(node):
    if isinstance(node, Num):
        if node.value < 0 or not math.isfinite(node.value):
            # not parser-producible; parenthesize so the text stays valid
            return f"({node.value!r})"
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({_render_expr(node.arg)})"
    return f"({_render_expr(node)})"
