"""Parser and evaluator for scalar functions of a single variable ``s``.

Grammar (infix, ``^`` is power, right-associative):

    expr    := sum (('<' | '<=' | '>' | '>=' | '==' | '!=') sum)?
    sum     := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | 's' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Built-in functions: exp, log, sin, cos, sqrt, abs, max, min and
``piecewise(cond1, val1, ..., condN, valN, default)`` where conditions
are comparisons (nonzero means true).  Parsing, printing and re-parsing
is stable: the printed text reproduces the tree exactly, so evaluation
is bit-identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExprError", "ExprSyntaxError", "UnknownFunctionError", "ArityError",
    "EvalError", "Num", "Var", "Neg", "Bin", "Cmp", "Call", "ExprAst",
    "parse_expression", "to_text", "evaluate",
]


class ExprError(ValueError):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"syntax error at position {position}: {message}")
        self.position = position


class UnknownFunctionError(ExprError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown function name {name!r} at position {position}")
        self.position = position


class ArityError(ExprError):
    def __init__(self, name: str, got: int, expected: str, position: int):
        super().__init__(
            f"arity mismatch for {name!r} at position {position}: "
            f"got {got} argument(s), expected {expected}"
        )
        self.position = position


class EvalError(ArithmeticError):
    """Non-finite value produced while evaluating an expression."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    child: "ExprAst"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Cmp:
    op: str  # one of < <= > >= == !=
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["ExprAst", ...]


ExprAst = Union[Num, Var, Neg, Bin, Cmp, Call]

# name -> (min arity, max arity or None for unbounded)
_FUNCTIONS: dict[str, tuple[int, int | None]] = {
    "exp": (1, 1), "log": (1, 1), "sin": (1, 1), "cos": (1, 1),
    "sqrt": (1, 1), "abs": (1, 1),
    "max": (2, None), "min": (2, None),
    "piecewise": (3, None),
}

_TOKEN_RE = re.compile(r"""
    (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|!=|[-+*/^(),<>])
  | (?P<ws>\s+)
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int  # 1-based position in the source


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[i]!r}", i + 1)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), i + 1))
        i = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def _eof_pos(self) -> int:
        # report the position of the last token when input ends early
        return self.tokens[-1].pos if self.tokens else 1

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of input", self._eof_pos())
        self.i += 1
        return tok

    def expect_op(self, op: str) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError(f"expected {op!r}", self._eof_pos())
        if tok.kind != "op" or tok.text != op:
            raise ExprSyntaxError(f"expected {op!r}, found {tok.text!r}", tok.pos)
        self.i += 1
        return tok

    def parse(self) -> ExprAst:
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.pos)
        return node

    def expr(self) -> ExprAst:
        left = self.sum()
        tok = self.peek()
        if tok and tok.kind == "op" and tok.text in ("<", "<=", ">", ">=", "==", "!="):
            self.i += 1
            right = self.sum()
            return Cmp(tok.text, left, right)
        return left

    def sum(self) -> ExprAst:
        node = self.term()
        while True:
            tok = self.peek()
            if tok and tok.kind == "op" and tok.text in "+-":
                self.i += 1
                node = Bin(tok.text, node, self.term())
            else:
                return node

    def term(self) -> ExprAst:
        node = self.unary()
        while True:
            tok = self.peek()
            if tok and tok.kind == "op" and tok.text in "*/":
                self.i += 1
                node = Bin(tok.text, node, self.unary())
            else:
                return node

    def unary(self) -> ExprAst:
        tok = self.peek()
        if tok and tok.kind == "op" and tok.text in "+-":
            self.i += 1
            child = self.unary()
            return Neg(child) if tok.text == "-" else child
        return self.power()

    def power(self) -> ExprAst:
        base = self.atom()
        tok = self.peek()
        if tok and tok.kind == "op" and tok.text == "^":
            self.i += 1
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> ExprAst:
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            nxt = self.peek()
            if nxt and nxt.kind == "op" and nxt.text == "(":
                return self.call(tok)
            if tok.text == "s":
                return Var()
            raise ExprSyntaxError(
                f"unknown identifier {tok.text!r} (the variable is 's')", tok.pos)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.pos)

    def call(self, name_tok: _Token) -> ExprAst:
        name = name_tok.text
        if name not in _FUNCTIONS:
            raise UnknownFunctionError(name, name_tok.pos)
        self.expect_op("(")
        args = [self.expr()]
        while True:
            tok = self.peek()
            if tok and tok.kind == "op" and tok.text == ",":
                self.i += 1
                args.append(self.expr())
            else:
                break
        self.expect_op(")")
        lo, hi = _FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            expected = f"{lo}" if hi == lo else (f">= {lo}" if hi is None else f"{lo}..{hi}")
            raise ArityError(name, len(args), expected, name_tok.pos)
        if name == "piecewise" and len(args) % 2 == 0:
            raise ArityError(name, len(args),
                             "an odd count: cond1, val1, ..., default", name_tok.pos)
        return Call(name, tuple(args))


def parse_expression(text: str) -> ExprAst:
    """Parse ``text`` into an expression tree.

    Raises :class:`ExprSyntaxError`, :class:`UnknownFunctionError` or
    :class:`ArityError`; all carry a 1-based ``position``.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 1)
    return _Parser(text).parse()


_PREC = {"cmp": 0, "+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(node: ExprAst) -> int:
    if isinstance(node, (Num, Var, Call)):
        return _PREC["atom"]
    if isinstance(node, Cmp):
        return _PREC["cmp"]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC[node.op]


def to_text(node: ExprAst) -> str:
    """Render a tree back to source text; ``parse(to_text(t)) == t``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "s"
    if isinstance(node, Neg):
        inner = to_text(node.child)
        if _prec(node.child) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    if isinstance(node, Cmp):
        left = to_text(node.left)
        right = to_text(node.right)
        if isinstance(node.left, Cmp):
            left = f"({left})"
        if isinstance(node.right, Cmp):
            right = f"({right})"
        return f"{left} {node.op} {right}"
    # binary arithmetic: keep association explicit where it matters
    lp, rp = _prec(node.left), _prec(node.right)
    me = _PREC[node.op]
    left = to_text(node.left)
    right = to_text(node.right)
    if node.op == "^":
        # right-associative; parenthesize a left operand of equal precedence
        if lp <= me:
            left = f"({left})"
        if rp < _PREC["neg"]:
            right = f"({right})"
    else:
        if lp < me:
            left = f"({left})"
        if rp < me or (rp == me and node.op in ("-", "/")):
            right = f"({right})"
        elif rp == me and node.op in ("+", "*") and isinstance(node.right, Bin):
            # preserve the parsed left-association of the right subtree
            right = f"({right})"
    return f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"


def _eval(node: ExprAst, s: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full_like(s, node.value)
    if isinstance(node, Var):
        return s
    if isinstance(node, Neg):
        return -_eval(node.child, s)
    if isinstance(node, Bin):
        a = _eval(node.left, s)
        b = _eval(node.right, s)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    if isinstance(node, Cmp):
        a = _eval(node.left, s)
        b = _eval(node.right, s)
        op = node.op
        if op == "<":
            r = a < b
        elif op == "<=":
            r = a <= b
        elif op == ">":
            r = a > b
        elif op == ">=":
            r = a >= b
        elif op == "==":
            r = a == b
        else:
            r = a != b
        return r.astype(float)
    # Call
    args = [_eval(a, s) for a in node.args]
    name = node.name
    if name == "exp":
        return np.exp(args[0])
    if name == "log":
        return np.log(args[0])
    if name == "sin":
        return np.sin(args[0])
    if name == "cos":
        return np.cos(args[0])
    if name == "sqrt":
        return np.sqrt(args[0])
    if name == "abs":
        return np.abs(args[0])
    if name == "max":
        out = args[0]
        for a in args[1:]:
            out = np.maximum(out, a)
        return out
    if name == "min":
        out = args[0]
        for a in args[1:]:
            out = np.minimum(out, a)
        return out
    # piecewise(cond1, val1, ..., default): first true condition wins
    out = args[-1]
    for cond, val in zip(args[-3::-2], args[-2::-2]):
        out = np.where(cond != 0.0, val, out)
    return out


def evaluate(node: ExprAst, s, check: bool = True):
    """Evaluate the tree at ``s`` (scalar or array).

    With ``check`` (the default) any non-finite result raises
    :class:`EvalError` naming the offending point; nothing is silently
    propagated.  Branches of ``piecewise`` are evaluated eagerly, but
    only the selected branch is checked.
    """
    arr = np.asarray(s, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    with np.errstate(all="ignore"):
        out = _eval(node, arr)
    out = np.asarray(out, dtype=float)
    if check:
        finite_in = np.isfinite(arr)
        bad = finite_in & ~np.isfinite(out)
        if np.any(bad):
            where = float(arr[bad][0])
            raise EvalError(f"expression evaluated to a non-finite value at s={where!r}")
    return float(out[0]) if scalar else out
