"""Closed-form scalar expressions in the jet coordinates.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are ``t1..tp``, ``x1..xn`` and ``v{i}{a}`` (also ``v{i}_{a}``) for the
fiber coordinate x^i_a.  Expressions can be evaluated numerically on many
points at once or as jets.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import ArityError, DomainError, ParseError, UnknownVariable

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "exp", "log", "sqrt")
CONSTANTS = {"pi": math.pi}

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


class Node:
    """Base class of expression tree nodes."""

    prec = _ATOM

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True, eq=True)
class Num(Node):
    value: float

    def text(self) -> str:
        if self.value.is_integer() and abs(self.value) < 1e15:
            return str(int(self.value))
        return repr(self.value)


@dataclass(frozen=True, eq=True)
class Const(Node):
    name: str

    def text(self) -> str:
        return self.name


@dataclass(frozen=True, eq=True)
class Var(Node):
    name: str
    index: int

    def text(self) -> str:
        return self.name


@dataclass(frozen=True, eq=True)
class Neg(Node):
    operand: Node
    prec = _PREC["neg"]

    def text(self) -> str:
        inner = self.operand.text()
        if self.operand.prec < self.prec:
            inner = f"({inner})"
        return "-" + inner


@dataclass(frozen=True, eq=True)
class Binary(Node):
    op: str
    left: Node
    right: Node

    @property
    def prec(self) -> int:
        return _PREC[self.op]

    def text(self) -> str:
        left, right = self.left.text(), self.right.text()
        if self.op == "^":
            if self.left.prec <= self.prec:
                left = f"({left})"
            if self.right.prec < _PREC["neg"]:
                right = f"({right})"
            return f"{left}^{right}"
        if self.left.prec < self.prec:
            left = f"({left})"
        if self.right.prec <= self.prec:
            right = f"({right})"
        return f"{left} {self.op} {right}"


@dataclass(frozen=True, eq=True)
class Call(Node):
    func: str
    arg: Node

    def text(self) -> str:
        return f"{self.func}({self.arg.text()})"


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_VAR = re.compile(r"^(?:(?P<t>t)(?P<ti>\d+)|(?P<x>x)(?P<xi>\d+)|v(?P<vi>\d)_?(?P<va>\d))$")


def variable_name(kind: str, *idx: int) -> str:
    """Canonical name of a coordinate ('t', 'x' or 'v'), indices 1-based."""
    if kind == "v":
        return f"v{idx[0]}{idx[1]}"
    return f"{kind}{idx[0]}"


def variable_index(name: str, p: int, n: int) -> int:
    """Flat jet-variable index of a coordinate name."""
    m = _VAR.match(name)
    if m is None:
        raise UnknownVariable(f"unknown identifier {name!r}")
    if m.group("t"):
        k = int(m.group("ti"))
        if not 1 <= k <= p:
            raise ArityError(f"{name} needs p >= {k} (p = {p})")
        return k - 1
    if m.group("x"):
        k = int(m.group("xi"))
        if not 1 <= k <= n:
            raise ArityError(f"{name} needs n >= {k} (n = {n})")
        return p + k - 1
    i, a = int(m.group("vi")), int(m.group("va"))
    if not (1 <= i <= n and 1 <= a <= p):
        raise ArityError(f"{name} out of range for n = {n}, p = {p}")
    return p + n + (i - 1) * p + (a - 1)


class _Parser:
    def __init__(self, text: str, p: int, n: int):
        self.text = text
        self.p, self.n = p, n
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text: str):
        tokens = []
        i = 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(text, i)
            if m is None or m.end() == i:
                raise ParseError(f"unexpected character {text[i]!r}", i)
            start = m.start(m.lastgroup)
            tokens.append((m.lastgroup, m.group(m.lastgroup), start))
            i = m.end()
        tokens.append(("end", "", len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def take(self, value=None):
        tok = self.tokens[self.pos]
        if value is not None and tok[1] != value:
            found = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {found!r}", tok[2])
        self.pos += 1
        return tok

    def parse(self) -> Node:
        if self.peek()[0] == "end":
            raise ParseError("empty expression", 0)
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ParseError(f"function {value!r} needs an argument", pos)
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(value, arg)
            if value in CONSTANTS:
                return Const(value)
            try:
                index = variable_index(value, self.p, self.n)
            except ParseError as exc:
                raise type(exc)(str(exc), pos) from None
            m = _VAR.match(value)
            name = value if not m.group("vi") else variable_name("v", int(m.group("vi")), int(m.group("va")))
            return Var(name, index)
        if value == "(":
            node = self.expr()
            self.take(")")
            return node
        found = value or "end of input"
        raise ParseError(f"unexpected {found!r}", pos)


def parse(text: str, p: int, n: int) -> Node:
    """Parse expression text for a (p, n) jet space."""
    if not isinstance(text, str):
        raise ParseError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, p, n).parse()


def variables(node: Node) -> set[int]:
    """Flat indices of the variables an expression mentions."""
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return variables(node.arg)
    return set()


# numeric evaluation ---------------------------------------------------------

def evaluate(node: Node, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate on points ``u`` of shape (B, N); returns (values, bad_mask)."""
    u = np.asarray(u, dtype=float)
    bad = np.zeros(u.shape[0], dtype=bool)
    with np.errstate(all="ignore"):
        out = _num(node, u, bad, {})
    out = np.broadcast_to(out, bad.shape).astype(float)
    bad |= ~np.isfinite(out)
    return out, bad


_NUMERIC = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "sinh": np.sinh,
    "cosh": np.cosh, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
}


def _num(node: Node, u, bad, memo):
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Num):
        out = np.float64(node.value)
    elif isinstance(node, Const):
        out = np.float64(CONSTANTS[node.name])
    elif isinstance(node, Var):
        out = u[:, node.index]
    elif isinstance(node, Neg):
        out = -_num(node.operand, u, bad, memo)
    elif isinstance(node, Call):
        arg = _num(node.arg, u, bad, memo)
        if node.func == "log":
            bad |= np.broadcast_to(arg <= 0, bad.shape)
        elif node.func == "sqrt":
            bad |= np.broadcast_to(arg < 0, bad.shape)
        out = _NUMERIC[node.func](arg)
    else:
        a = _num(node.left, u, bad, memo)
        b = _num(node.right, u, bad, memo)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        elif node.op == "/":
            bad |= np.broadcast_to(b == 0, bad.shape)
            out = a / b
        else:
            out = np.power(a, b)
    bad |= np.broadcast_to(~np.isfinite(out), bad.shape)
    memo[key] = out
    return out


# jet evaluation -------------------------------------------------------------

_JET_FUNCS = {
    "sin": jets.sin, "cos": jets.cos, "tan": jets.tan, "sinh": jets.sinh,
    "cosh": jets.cosh, "exp": jets.exp, "log": jets.log, "sqrt": jets.sqrt,
}


def jet(node: Node, variables_jet: jets.Jet, memo: dict | None = None) -> jets.Jet:
    """Evaluate as a jet; ``variables_jet`` has tensor shape (N,).

    ``memo`` may be shared between calls so common subtrees (by identity) are
    evaluated once.
    """
    memo = {} if memo is None else memo
    out = _jet(node, variables_jet, memo)
    if not isinstance(out, jets.Jet):
        shape = (variables_jet.batch,)
        out = jets.Jet.constant(variables_jet.space, np.full(shape, float(out)), variables_jet.order)
    return out


def _jet(node: Node, V: jets.Jet, memo):
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Num):
        out = node.value
    elif isinstance(node, Const):
        out = CONSTANTS[node.name]
    elif isinstance(node, Var):
        out = V[node.index]
    elif isinstance(node, Neg):
        out = -_jet(node.operand, V, memo)
    elif isinstance(node, Call):
        arg = _jet(node.arg, V, memo)
        if isinstance(arg, jets.Jet):
            out = _JET_FUNCS[node.func](arg)
        else:
            out = _scalar_call(node.func, arg)
    else:
        a = _jet(node.left, V, memo)
        b = _jet(node.right, V, memo)
        out = _jet_binary(node.op, a, b)
    memo[key] = out
    return out


def _scalar_call(func: str, x: float) -> float:
    with np.errstate(all="ignore"):
        out = float(_NUMERIC[func](x))
    if (func == "log" and x <= 0) or (func == "sqrt" and x < 0) or not math.isfinite(out):
        raise DomainError(f"{func}({x}) is undefined")
    return out


def _jet_binary(op: str, a, b):
    a_jet, b_jet = isinstance(a, jets.Jet), isinstance(b, jets.Jet)
    if not (a_jet or b_jet):
        if op == "/" and b == 0:
            raise DomainError("division by zero")
        with np.errstate(all="ignore"):
            out = {"+": a + b, "-": a - b, "*": a * b}.get(op)
            if out is None:
                out = a / b if op == "/" else float(np.power(a, b))
        if not math.isfinite(out):
            raise DomainError(f"undefined constant operation {a} {op} {b}")
        return out
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if b_jet:
        return a ** b
    return a ** float(b)
