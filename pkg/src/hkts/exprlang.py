"""A small expression language for integrands in job configs.

Grammar (loosest binding first)::

    top     := '[' expr (',' expr)* ']' | expr
    expr    := term (('+' | '-') term)*
    term    := power (('*' | '/') power)*
    power   := unary ('^' power)?          # right associative
    unary   := '-' unary | primary
    primary := NUMBER | 't' | '(' expr ')' | NAME '(' args ')'
    cond    := expr ('<' | '<=' | '>' | '>=' | '=') expr

Unary minus binds tighter than ``^``, so ``-t^2`` is ``(-t)^2``.  The only
variable is ``t``; ``piecewise(cond, then, else)`` is the only place a
comparison may appear.  Evaluation works on numpy arrays and raises
``EvalError`` instead of producing inf or nan.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import HKError

FUNCS = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
    "piecewise": 3,
}
CMP_OPS = {"<": "<", "<=": "<=", "≤": "<=", ">": ">", ">=": ">=", "≥": ">=", "=": "=", "==": "="}


class ParseError(HKError, ValueError):
    def __init__(self, offset: int, expected: str, found: str):
        self.offset = offset
        self.expected = expected
        self.found = found
        super().__init__(f"at offset {offset}: expected {expected}, found {found}")


class EvalError(HKError, ValueError):
    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(f"{message} at t={t!r}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "t"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Piecewise:
    cond: Compare
    then: "Node"
    otherwise: "Node"


@dataclass(frozen=True)
class Vector:
    items: tuple


Node = Union[Num, Var, Neg, BinOp, Call, Compare, Piecewise, Vector]


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|[-+*/^(),\[\]<>=≤≥])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(_byte_offset(text, pos), "token", repr(text[pos]))
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(_byte_offset(self.text, t.pos), expected, found)

    def accept(self, *texts) -> bool:
        if self.tok.kind == "op" and self.tok.text in texts:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.fail(repr(text))

    def top(self) -> Node:
        if self.accept("["):
            items = [self.expr()]
            while self.accept(","):
                items.append(self.expr())
            self.expect("]")
            node = Vector(tuple(items))
        else:
            node = self.expr()
        if self.tok.kind != "eof":
            self.fail("operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.power()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.power())
        return node

    def power(self) -> Node:
        base = self.unary()
        if self.accept("^"):
            return BinOp("^", base, self.power())
        return base

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "name":
            if t.text == "t":
                self.i += 1
                return Var("t")
            if t.text not in FUNCS:
                self.fail("'t' or a function name")
            self.i += 1
            return self.call(t.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail("operand")

    def call(self, name: str) -> Node:
        self.expect("(")
        if name == "piecewise":
            cond = self.cond()
            self.expect(",")
            then = self.expr()
            self.expect(",")
            other = self.expr()
            self.expect(")")
            return Piecewise(cond, then, other)
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        if len(args) != FUNCS[name]:
            self.fail(f"{FUNCS[name]} argument(s) to {name}")
        self.expect(")")
        return Call(name, tuple(args))

    def cond(self) -> Compare:
        left = self.expr()
        t = self.tok
        if t.kind != "op" or t.text not in CMP_OPS:
            self.fail("comparison operator")
        self.i += 1
        return Compare(CMP_OPS[t.text], left, self.expr())


def parse(text: str) -> Node:
    return _Parser(text).top()


def free_vars(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    out = set()
    for child in _children(node):
        out |= free_vars(child)
    return out


def _children(node: Node):
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, (BinOp, Compare)):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    if isinstance(node, Piecewise):
        return (node.cond, node.then, node.otherwise)
    if isinstance(node, Vector):
        return node.items
    return ()


def to_source(node: Node) -> str:
    """Fully parenthesised source text; ``parse(to_source(n)) == n``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Compare):
        return f"{to_source(node.left)} {node.op} {to_source(node.right)}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Piecewise):
        return f"piecewise({to_source(node.cond)}, {to_source(node.then)}, {to_source(node.otherwise)})"
    if isinstance(node, Vector):
        return "[" + ", ".join(to_source(i) for i in node.items) + "]"
    raise TypeError(f"not an expression node: {node!r}")


def dim_of(node: Node) -> int:
    return len(node.items) if isinstance(node, Vector) else 1


# evaluation


def _check(values: np.ndarray, t: np.ndarray, message: str) -> np.ndarray:
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise EvalError(message, float(t[np.argmax(bad)]))
    return values


def _ev(node: Node, t: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(t.shape, node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_ev(node.operand, t)
    if isinstance(node, BinOp):
        x = _ev(node.left, t)
        y = _ev(node.right, t)
        with np.errstate(all="ignore"):
            if node.op == "+":
                return _check(x + y, t, "overflow")
            if node.op == "-":
                return _check(x - y, t, "overflow")
            if node.op == "*":
                return _check(x * y, t, "overflow")
            if node.op == "/":
                zero = y == 0
                if np.any(zero):
                    raise EvalError("division by zero", float(t[np.argmax(zero)]))
                return _check(x / y, t, "overflow")
            if node.op == "^":
                zero = (x == 0) & (y < 0)
                if np.any(zero):
                    raise EvalError("division by zero", float(t[np.argmax(zero)]))
                return _check(np.power(x, y), t, "domain error in ^")
        raise ValueError(node.op)
    if isinstance(node, Call):
        args = [_ev(a, t) for a in node.args]
        x = args[0]
        with np.errstate(all="ignore"):
            if node.name == "log":
                bad = x <= 0
                if np.any(bad):
                    raise EvalError("log of a non-positive number", float(t[np.argmax(bad)]))
                return np.log(x)
            if node.name == "sqrt":
                bad = x < 0
                if np.any(bad):
                    raise EvalError("sqrt of a negative number", float(t[np.argmax(bad)]))
                return np.sqrt(x)
            if node.name == "exp":
                return _check(np.exp(x), t, "overflow in exp")
            if node.name == "sin":
                return np.sin(x)
            if node.name == "cos":
                return np.cos(x)
            if node.name == "abs":
                return np.abs(x)
            if node.name == "min":
                return np.minimum(x, args[1])
            if node.name == "max":
                return np.maximum(x, args[1])
        raise ValueError(node.name)
    if isinstance(node, Piecewise):
        mask = _cond(node.cond, t)
        out = np.empty(t.shape)
        # each branch only sees the points that select it
        if np.any(mask):
            out[mask] = _ev(node.then, t[mask])
        if not np.all(mask):
            out[~mask] = _ev(node.otherwise, t[~mask])
        return out
    if isinstance(node, Compare):
        raise TypeError("a comparison is not a value")
    if isinstance(node, Vector):
        raise TypeError("vectors are only allowed at the top level")
    raise TypeError(f"not an expression node: {node!r}")


def _cond(node: Compare, t: np.ndarray) -> np.ndarray:
    x = _ev(node.left, t)
    y = _ev(node.right, t)
    return {
        "<": np.less,
        "<=": np.less_equal,
        ">": np.greater,
        ">=": np.greater_equal,
        "=": np.equal,
    }[node.op](x, y)


def eval_array(node: Node, t) -> np.ndarray:
    """Evaluate at every point of ``t``; the result has shape (len(t), dim)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(node, Vector):
        cols = [_ev(item, t) for item in node.items]
        return np.stack([np.broadcast_to(c, t.shape) for c in cols], axis=1)
    return np.broadcast_to(_ev(node, t), t.shape).reshape(-1, 1).copy()


def evaluate(node: Node, t: float):
    """Value at a single point as a lattice element."""
    from .riesz import LatticeElement, LatticeSpace, SCALAR

    row = eval_array(node, [t])[0]
    space = SCALAR if len(row) == 1 else LatticeSpace.vector(len(row))
    return LatticeElement(space, tuple(float(v) for v in row))


def compile_expr(text: str):
    """Parse ``text`` into an ``Integrand`` of the right dimension."""
    from .integrator import Integrand
    from .riesz import LatticeSpace, SCALAR

    node = parse(text)
    dim = dim_of(node)
    space = SCALAR if dim == 1 else LatticeSpace.vector(dim)
    return Integrand(lambda ts: eval_array(node, ts), space, name=text)

