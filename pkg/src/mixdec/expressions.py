"""A small arithmetic expression language for user-defined maps.

Expressions are written over the variables ``x1 .. xd``, the constant
``pi``, numeric literals, the binary operators ``+ - * /``, unary minus,
and the functions ``sin``, ``cos``, ``exp`` (one argument) and
``mod`` (two arguments, same sign convention as ``numpy.mod``).

An expression compiles to a vectorized evaluator mapping an ``(n, d)``
array of points to an ``(n,)`` array of values.  Compilation happens
once at system construction; evaluation raises
:class:`~mixdec.errors.EvaluationError` on numeric failure.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import EvaluationError, ExpressionSyntaxError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),]))"
)

_FUNCTIONS = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "mod": (2, np.mod),
}


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            at = len(src) - len(stripped)
            raise ExpressionSyntaxError(
                f"unexpected character {stripped[0]!r}", at, src
            )
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    """Recursive-descent parser producing a nested-tuple AST."""

    def __init__(self, src, dim):
        self.src = src
        self.dim = dim
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.next()
        if text != value:
            raise ExpressionSyntaxError(
                f"expected {value!r}, found {text or 'end of input'!r}",
                pos,
                self.src,
            )

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(
                f"unexpected trailing input {text!r}", pos, self.src
            )
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            node = (op, node, self.factor())
        return node

    def factor(self):
        kind, text, pos = self.peek()
        if text == "-":
            self.next()
            return ("neg", self.factor())
        if text == "+":
            self.next()
            return self.factor()
        return self.atom()

    def atom(self):
        kind, text, pos = self.next()
        if kind == "num":
            return ("const", float(text))
        if kind == "ident":
            if text == "pi":
                return ("const", math.pi)
            if text in _FUNCTIONS:
                arity, _ = _FUNCTIONS[text]
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != arity:
                    raise ExpressionSyntaxError(
                        f"{text} takes {arity} argument(s), got {len(args)}",
                        pos,
                        self.src,
                    )
                return (text, *args)
            var = re.fullmatch(r"x(\d+)", text)
            if var:
                idx = int(var.group(1))
                if not 1 <= idx <= self.dim:
                    raise ExpressionSyntaxError(
                        f"variable {text} out of range for dimension {self.dim}",
                        pos,
                        self.src,
                    )
                return ("var", idx - 1)
            raise ExpressionSyntaxError(f"unknown name {text!r}", pos, self.src)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionSyntaxError(
            f"expected a value, found {text or 'end of input'!r}", pos, self.src
        )


def _compile(node):
    head = node[0]
    if head == "const":
        v = node[1]
        return lambda X: v
    if head == "var":
        i = node[1]
        return lambda X: X[:, i]
    if head == "neg":
        f = _compile(node[1])
        return lambda X: -f(X)
    if head in ("+", "-", "*", "/"):
        fa = _compile(node[1])
        fb = _compile(node[2])
        if head == "+":
            return lambda X: fa(X) + fb(X)
        if head == "-":
            return lambda X: fa(X) - fb(X)
        if head == "*":
            return lambda X: fa(X) * fb(X)
        return lambda X: fa(X) / fb(X)
    arity, fn = _FUNCTIONS[head]
    if arity == 1:
        fa = _compile(node[1])
        return lambda X: fn(fa(X))
    fa = _compile(node[1])
    fb = _compile(node[2])
    return lambda X: fn(fa(X), fb(X))


class Expression:
    """A compiled scalar-valued expression over points in R^d."""

    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        self._fn = _compile(_Parser(source, dim).parse())

    def __repr__(self):
        return f"Expression({self.source!r}, dim={self.dim})"

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Evaluate on an (n, d) array of points, returning shape (n,)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise EvaluationError(
                f"expected points of shape (n, {self.dim}), got {X.shape}"
            )
        try:
            with np.errstate(all="raise"):
                out = self._fn(X)
        except FloatingPointError as exc:
            raise EvaluationError(
                f"evaluation of {self.source!r} failed: {exc}"
            ) from exc
        out = np.asarray(out, dtype=float)
        if out.ndim == 0:
            out = np.full(X.shape[0], float(out))
        if not np.all(np.isfinite(out)):
            raise EvaluationError(
                f"evaluation of {self.source!r} produced a non-finite value"
            )
        return out


def parse_expression(source: str, dim: int) -> Expression:
    return Expression(source, dim)
