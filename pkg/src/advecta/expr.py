"""Scalar expressions of the time variable ``t``.

Grammar (highest binding last)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | 't' | 'pi' | 'e' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

so ``^`` binds tighter than unary minus (``-t^2 == -(t^2)``) and is right
associative, while ``+ - * /`` associate to the left.

Evaluation accepts a float or a numpy array of times and never returns NaN:
any domain violation raises :class:`~advecta.errors.EvalError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EvalError, ExprSyntaxError

__all__ = [
    "Num", "Var", "Const", "Neg", "BinOp", "Call", "Expression",
    "parse", "evaluate", "to_string", "is_constant", "FUNCTIONS", "CONSTANTS",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expression = Union[Num, Var, Const, Neg, BinOp, Call]

CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1,
    "sqrt": 1, "abs": 1, "min": 2, "max": 2,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, self.text, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "num":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            self.error(f"expected {value!r}, found {what}")
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0:2] == ("op", "^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, value, offset = tok = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(value))
        if kind == "name":
            self.advance()
            if self.peek()[0:2] == ("op", "("):
                if value not in FUNCTIONS:
                    self.error(f"unknown function {value!r}", tok)
                self.advance()
                args = [self.expr()]
                while self.peek()[0:2] == ("op", ","):
                    self.advance()
                    args.append(self.expr())
                close = self.peek()
                self.expect(")")
                if len(args) != FUNCTIONS[value]:
                    raise ExprSyntaxError(
                        f"{value} takes {FUNCTIONS[value]} argument(s), got {len(args)}",
                        self.text, close[2],
                    )
                return Call(value, tuple(args))
            if value == "t":
                return Var()
            if value in CONSTANTS:
                return Const(value)
            if value in FUNCTIONS:
                self.error(f"function {value!r} needs arguments", tok)
            self.error(f"unknown identifier {value!r}", tok)
        if (kind, value) == ("op", "("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(value)
        self.error(f"unexpected {what}")


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree; raises ExprSyntaxError."""
    if not isinstance(text, str):
        raise TypeError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text).parse()


def to_string(e: Expression) -> str:
    """Canonical, fully parenthesised text that parses back to an equal value."""
    match e:
        case Num(value):
            text = repr(float(value))
            return f"(-{text[1:]})" if text.startswith("-") else text
        case Var():
            return "t"
        case Const(name):
            return name
        case Neg(operand):
            return f"(-{to_string(operand)})"
        case BinOp(op, left, right):
            return f"({to_string(left)} {op} {to_string(right)})"
        case Call(name, args):
            return f"{name}({', '.join(to_string(a) for a in args)})"
    raise TypeError(f"not an expression node: {e!r}")


def is_constant(e: Expression) -> bool:
    match e:
        case Var():
            return False
        case Num() | Const():
            return True
        case Neg(operand):
            return is_constant(operand)
        case BinOp(_, left, right):
            return is_constant(left) and is_constant(right)
        case Call(_, args):
            return all(is_constant(a) for a in args)
    raise TypeError(f"not an expression node: {e!r}")


def _check(value, what):
    if not np.all(np.isfinite(value)):
        raise EvalError(f"{what} produced a non-finite value")
    return value


def _eval(e, t):
    match e:
        case Num(value):
            return value
        case Var():
            return t
        case Const(name):
            return CONSTANTS[name]
        case Neg(operand):
            return -_eval(operand, t)
        case BinOp(op, left, right):
            a = _eval(left, t)
            b = _eval(right, t)
            if op == "+":
                return _check(np.add(a, b), "addition")
            if op == "-":
                return _check(np.subtract(a, b), "subtraction")
            if op == "*":
                return _check(np.multiply(a, b), "multiplication")
            if op == "/":
                if np.any(np.asarray(b) == 0):
                    raise EvalError("division by zero")
                return _check(np.divide(a, b), "division")
            return _check(np.power(np.asarray(a, dtype=float), b), "power")
        case Call(name, args):
            vals = [_eval(a, t) for a in args]
            x = vals[0]
            if name == "log" and np.any(np.asarray(x) <= 0):
                raise EvalError("log of a non-positive number")
            if name == "sqrt" and np.any(np.asarray(x) < 0):
                raise EvalError("sqrt of a negative number")
            if name == "min":
                return np.minimum(x, vals[1])
            if name == "max":
                return np.maximum(x, vals[1])
            fn = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
                  "log": np.log, "sqrt": np.sqrt, "abs": np.abs}[name]
            return _check(fn(x), name)
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expression, t):
    """Value of ``e`` at ``t``.

    ``t`` may be a scalar (a float is returned) or an array (an array of the
    same shape is returned, constants broadcast).
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise EvalError("t must be finite")
    with np.errstate(all="ignore"):
        value = _eval(e, t_arr if t_arr.ndim else float(t_arr))
    value = _check(np.asarray(value, dtype=float), "expression")
    if t_arr.ndim == 0:
        return float(value)
    return np.broadcast_to(value, t_arr.shape).astype(float, copy=True)
