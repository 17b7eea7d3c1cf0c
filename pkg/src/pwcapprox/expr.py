"""Infix expression parser and evaluator for target functions.

Expressions use the variables ``x1 ... xn``, the binary operators
``+ - * / ^`` and the functions ``abs sin cos exp log sqrt tanh``.
Precedence, highest first: ``^`` (right associative), unary minus,
``* /``, ``+ -``.  Evaluation is vectorized over a batch of points so the
builders can sample densely without a Python loop per point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

FUNCTIONS = ("abs", "sin", "cos", "exp", "log", "sqrt", "tanh")

DEFAULT_GRAD_STEP = 1e-5
DEFAULT_HESS_STEP = 1e-3


class ParseError(ValueError):
    """Malformed expression.  ``position`` is a byte offset into the source."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


class DomainError(ArithmeticError):
    """An operand left the domain of its operator (log of 0, x/0, ...)."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


@dataclass(frozen=True)
class Const:
    value: float
    pos: int = 0


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, x1 is index 1
    pos: int = 0


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Node"
    pos: int = 0


@dataclass(frozen=True)
class Binary:
    op: str  # one of "+-*/^"
    left: "Node"
    right: "Node"
    pos: int = 0


Node = Union[Const, Var, Unary, Binary]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ParseError(f"unexpected character {source[i]!r}", _byte_offset(source, i))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(source, i)))
        i = m.end()
    tokens.append(("end", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source: str, char_index: int) -> int:
    return len(source[:char_index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, dimension: int):
        self.tokens = _tokenize(source)
        self.k = 0
        self.dimension = dimension

    @property
    def tok(self):
        return self.tokens[self.k]

    def advance(self):
        t = self.tokens[self.k]
        self.k += 1
        return t

    def expect(self, text: str):
        kind, value, pos = self.tok
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ParseError(f"expected {text!r}, found {found}", pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.additive()
        kind, value, pos = self.tok
        if kind != "end":
            raise ParseError(f"unexpected token {value!r}", pos)
        return node

    def additive(self) -> Node:
        node = self.multiplicative()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            _, op, pos = self.advance()
            node = Binary(op, node, self.multiplicative(), pos)
        return node

    def multiplicative(self) -> Node:
        node = self.unary()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            _, op, pos = self.advance()
            node = Binary(op, node, self.unary(), pos)
        return node

    def unary(self) -> Node:
        kind, value, pos = self.tok
        if kind == "op" and value == "-":
            self.advance()
            return Unary("neg", self.unary(), pos)
        if kind == "op" and value == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.tok[0] == "op" and self.tok[1] == "^":
            _, _, pos = self.advance()
            # right operand re-enters unary so that x^-2 and x^y^z parse
            return Binary("^", base, self.unary(), pos)
        return base

    def primary(self) -> Node:
        kind, value, pos = self.tok
        if kind == "num":
            self.advance()
            return Const(float(value), pos)
        if kind == "name":
            self.advance()
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.additive()
                self.expect(")")
                return Unary(value, arg, pos)
            m = re.fullmatch(r"x([1-9]\d*)", value)
            if m is None:
                raise ParseError(f"unknown name {value!r}", pos)
            index = int(m.group(1))
            if index > self.dimension:
                raise ParseError(
                    f"variable {value} exceeds dimension {self.dimension}", pos
                )
            return Var(index, pos)
        if kind == "op" and value == "(":
            self.advance()
            node = self.additive()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"expected an operand, found {found}", pos)


@dataclass(frozen=True)
class Expr:
    """A parsed expression over ``dimension`` variables."""

    root: Node
    dimension: int
    source: str = ""

    def __call__(self, x) -> float:
        return eval_expr(self, x)

    def evaluate_many(self, points) -> np.ndarray:
        """Evaluate at each row of an ``(m, dimension)`` array."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise ValueError(
                f"expected points of shape (m, {self.dimension}), got {pts.shape}"
            )
        with np.errstate(all="ignore"):
            out = _eval_node(self.root, pts)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    def variables(self) -> set[int]:
        found: set[int] = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                found.add(node.index)
            elif isinstance(node, Unary):
                stack.append(node.arg)
            elif isinstance(node, Binary):
                stack.extend((node.left, node.right))
        return found

    def __str__(self) -> str:
        return to_source(self.root)


def parse(source: str, dimension: int) -> Expr:
    if dimension < 1:
        raise ValueError("dimension must be a positive integer")
    return Expr(_Parser(source, dimension).parse(), dimension, source)


def _eval_node(node: Node, pts: np.ndarray):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return pts[:, node.index - 1]
    if isinstance(node, Unary):
        v = _eval_node(node.arg, pts)
        op = node.op
        if op == "neg":
            return -v
        if op == "abs":
            return np.abs(v)
        if op == "log":
            if np.any(np.asarray(v) <= 0):
                raise DomainError("log of a non-positive number", node.pos)
            return np.log(v)
        if op == "sqrt":
            if np.any(np.asarray(v) < 0):
                raise DomainError("sqrt of a negative number", node.pos)
            return np.sqrt(v)
        return getattr(np, op)(v)
    left = _eval_node(node.left, pts)
    right = _eval_node(node.right, pts)
    op = node.op
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if np.any(np.asarray(right) == 0):
            raise DomainError("division by zero", node.pos)
        return left / right
    base = np.asarray(left, dtype=float)
    expo = np.asarray(right, dtype=float)
    if np.any((base < 0) & (expo != np.round(expo))):
        raise DomainError("negative base with non-integer exponent", node.pos)
    if np.any((base == 0) & (expo < 0)):
        raise DomainError("zero raised to a negative power", node.pos)
    return np.power(base, expo)


def eval_expr(ast: Expr, x) -> float:
    """Evaluate at a single point ``x`` of length ``ast.dimension``."""
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.shape != (ast.dimension,):
        raise ValueError(f"expected a point of length {ast.dimension}, got {point.shape}")
    return float(ast.evaluate_many(point[None, :])[0])


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def to_source(node: Node) -> str:
    """Print a node as parseable text.  Constants use ``repr`` so that
    reparsing reproduces them bit for bit."""
    if isinstance(node, Const):
        v = node.value
        if v != v:
            raise ValueError("cannot print NaN constant")
        if v in (float("inf"), float("-inf")):
            text = "1e999"
        else:
            text = repr(abs(v))
        return f"(-{text})" if np.signbit(v) else text
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_source(node.arg)})"
        return f"{node.op}({to_source(node.arg)})"
    return f"({to_source(node.left)}{node.op}{to_source(node.right)})"


def as_batch(f) -> Callable[[np.ndarray], np.ndarray]:
    """Return a callable mapping an ``(m, n)`` point array to ``m`` values.

    Accepts an :class:`Expr` or any callable that is already vectorized
    over rows.
    """
    if isinstance(f, Expr):
        return f.evaluate_many
    return lambda pts: np.asarray(f(np.asarray(pts, dtype=float)), dtype=float).reshape(-1)


def gradient_fd(ast, x, h: float = DEFAULT_GRAD_STEP) -> np.ndarray:
    """Central-difference gradient at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return gradient_fd_many(ast, x[None, :], h)[0]


def gradient_fd_many(f, points, h: float = DEFAULT_GRAD_STEP) -> np.ndarray:
    if h <= 0:
        raise ValueError("step h must be positive")
    evaluate = as_batch(f)
    pts = np.asarray(points, dtype=float)
    m, n = pts.shape
    stencil = np.empty((2 * n, m, n))
    for j in range(n):
        stencil[2 * j] = pts
        stencil[2 * j, :, j] += h
        stencil[2 * j + 1] = pts
        stencil[2 * j + 1, :, j] -= h
    vals = evaluate(stencil.reshape(-1, n)).reshape(2 * n, m)
    return ((vals[0::2] - vals[1::2]) / (2 * h)).T


def hessian_fd(ast, x, h: float = DEFAULT_HESS_STEP) -> np.ndarray:
    """Second-order central-difference Hessian at a single point,
    returned symmetrized as ``(H + H.T) / 2``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return hessian_fd_many(ast, x[None, :], h)[0]


def hessian_fd_many(f, points, h: float = DEFAULT_HESS_STEP) -> np.ndarray:
    if h <= 0:
        raise ValueError("step h must be positive")
    evaluate = as_batch(f)
    pts = np.asarray(points, dtype=float)
    m, n = pts.shape
    offsets = [np.zeros(n)]
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        offsets += [e, -e]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pairs:
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            e = np.zeros(n)
            e[i] = si * h
            e[j] = sj * h
            offsets.append(e)
    offsets = np.array(offsets)
    stencil = pts[None, :, :] + offsets[:, None, :]
    vals = evaluate(stencil.reshape(-1, n)).reshape(len(offsets), m)
    center = vals[0]
    H = np.zeros((m, n, n))
    for j in range(n):
        H[:, j, j] = (vals[1 + 2 * j] - 2 * center + vals[2 + 2 * j]) / (h * h)
    base = 1 + 2 * n
    for k, (i, j) in enumerate(pairs):
        pp, pm, mp, mm = vals[base + 4 * k: base + 4 * k + 4]
        H[:, i, j] = H[:, j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return 0.5 * (H + np.swapaxes(H, 1, 2))


def relabel(ast: Expr, mapping: dict[int, int], dimension: int) -> Expr:
    """Rename variables (``{old_index: new_index}``) and set a new dimension."""

    def walk(node):
        if isinstance(node, Var):
            return Var(mapping.get(node.index, node.index), node.pos)
        if isinstance(node, Unary):
            return Unary(node.op, walk(node.arg), node.pos)
        if isinstance(node, Binary):
            return Binary(node.op, walk(node.left), walk(node.right), node.pos)
        return node

    root = walk(ast.root)
    out = Expr(root, dimension, ast.source)
    bad = [i for i in out.variables() if i > dimension]
    if bad:
        raise ValueError(f"variable x{bad[0]} exceeds dimension {dimension}")
    return out
