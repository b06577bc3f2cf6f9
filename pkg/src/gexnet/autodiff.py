"""Nested differentiation engine.

Every quantity on the tape is a truncated first-order pair (value, dx1)
where dx1 is the exact derivative with respect to the seeded composition
input.  Forward evaluation propagates both channels by dual-number
calculus; the reverse sweep then differentiates the whole two-channel
computation with respect to registered parameters.  Losses that read a
dx1 channel (through ``Tape.tangent``) therefore get parameter
gradients that correctly flow through the composition derivative.

Only the first composition derivative is tracked.  The value produced
by ``tangent`` is treated as composition-constant, so a second
``tangent`` of it yields zero, not the second derivative.

All arithmetic is float64.  Re-evaluating the same graph with identical
inputs is bit-reproducible: there is no threading and no reordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["DualScalar", "Node", "Tape", "dual_silu", "sigmoid", "silu"]


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def silu(z):
    """z * sigmoid(z), elementwise."""
    return np.asarray(z, dtype=np.float64) * sigmoid(z)


def _silu_d1(z, s):
    # silu'(z) = s * (1 + z * (1 - s)), with s = sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def _silu_d2(z, s):
    # silu'' = 2*sigmoid' + z*sigmoid'', sigmoid' = s(1-s), sigmoid'' = s(1-s)(1-2s)
    sp = s * (1.0 - s)
    return 2.0 * sp + z * sp * (1.0 - 2.0 * s)


# ---------------------------------------------------------------------------
# Scalar dual numbers
# ---------------------------------------------------------------------------


@dataclass
class DualScalar:
    """A real value paired with its derivative with respect to x1.

    Constants carry dx1 = 0; the mole-fraction input is seeded with
    dx1 = 1 and its complement with dx1 = -1.
    """

    value: float
    dx1: float = 0.0

    @staticmethod
    def _coerce(x) -> "DualScalar":
        if isinstance(x, DualScalar):
            return x
        return DualScalar(float(x), 0.0)

    def __add__(self, other):
        o = DualScalar._coerce(other)
        return DualScalar(self.value + o.value, self.dx1 + o.dx1)

    __radd__ = __add__

    def __sub__(self, other):
        o = DualScalar._coerce(other)
        return DualScalar(self.value - o.value, self.dx1 - o.dx1)

    def __rsub__(self, other):
        o = DualScalar._coerce(other)
        return DualScalar(o.value - self.value, o.dx1 - self.dx1)

    def __mul__(self, other):
        o = DualScalar._coerce(other)
        return DualScalar(
            self.value * o.value, self.dx1 * o.value + self.value * o.dx1
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = DualScalar._coerce(other)
        if o.value == 0.0:
            raise DomainError("dual division by zero")
        inv = 1.0 / o.value
        return DualScalar(
            self.value * inv, (self.dx1 * o.value - self.value * o.dx1) * inv * inv
        )

    def __rtruediv__(self, other):
        return DualScalar._coerce(other).__truediv__(self)

    def __neg__(self):
        return DualScalar(-self.value, -self.dx1)


def dual_silu(a: DualScalar) -> DualScalar:
    """SiLU on a dual scalar, chain rule applied to dx1."""
    z = a.value
    if z >= 0.0:
        s = 1.0 / (1.0 + math.exp(-z))
    else:
        ez = math.exp(z)
        s = ez / (1.0 + ez)
    return DualScalar(z * s, _silu_d1(z, s) * a.dx1)


# ---------------------------------------------------------------------------
# Tape
# ---------------------------------------------------------------------------


class Node:
    """One tape entry: a float64 array value and its optional dx1 channel.

    ``dx1 is None`` means the channel is identically zero; that is
    preserved exactly through all operations.
    """

    __slots__ = ("tape", "idx", "op", "parents", "value", "dx1", "_sum_meta")

    def __init__(self, tape, idx, op, parents, value, dx1):
        self.tape = tape
        self.idx = idx
        self.op = op
        self.parents = parents
        self.value = value
        self.dx1 = dx1

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return self.tape.add(self, self.tape.lift(other))

    def __radd__(self, other):
        return self.tape.add(self.tape.lift(other), self)

    def __sub__(self, other):
        return self.tape.sub(self, self.tape.lift(other))

    def __rsub__(self, other):
        return self.tape.sub(self.tape.lift(other), self)

    def __mul__(self, other):
        return self.tape.mul(self, self.tape.lift(other))

    def __rmul__(self, other):
        return self.tape.mul(self.tape.lift(other), self)

    def __truediv__(self, other):
        return self.tape.div(self, self.tape.lift(other))

    def __rtruediv__(self, other):
        return self.tape.div(self.tape.lift(other), self)

    def __neg__(self):
        return self.tape.neg(self)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted adjoint back down to the parent's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tape:
    """Eager computation graph over dual-valued array nodes.

    Nodes are appended in evaluation order, so every parent precedes its
    children and the reverse sweep visits each node exactly once.  A tape
    is built, differentiated, and discarded; it is not shareable across
    concurrent evaluations.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._param_idx: dict[str, int] = {}

    # -- leaf constructors --------------------------------------------------

    def _append(self, op, parents, value, dx1) -> Node:
        node = Node(self, len(self.nodes), op, parents, value, dx1)
        self.nodes.append(node)
        return node

    def constant(self, value) -> Node:
        return self._append("const", (), np.asarray(value, dtype=np.float64), None)

    def lift(self, x) -> Node:
        return x if isinstance(x, Node) else self.constant(x)

    def seed_input(self, value, dx1) -> Node:
        """Leaf with an explicit dx1 channel (the composition inputs)."""
        value = np.asarray(value, dtype=np.float64)
        dx1 = np.broadcast_to(np.asarray(dx1, dtype=np.float64), value.shape)
        return self._append("input", (), value, dx1)

    def parameter(self, name: str, value) -> Node:
        """Leaf whose gradient is reported by ``backward`` under ``name``."""
        if name in self._param_idx:
            raise ValueError(f"parameter {name!r} registered twice")
        node = self._append("param", (), np.asarray(value, dtype=np.float64), None)
        self._param_idx[name] = node.idx
        return node

    # -- elementwise arithmetic ---------------------------------------------

    def add(self, a: Node, b: Node) -> Node:
        value = a.value + b.value
        if a.dx1 is None and b.dx1 is None:
            dx1 = None
        elif a.dx1 is None:
            dx1 = np.broadcast_to(b.dx1, value.shape)
        elif b.dx1 is None:
            dx1 = np.broadcast_to(a.dx1, value.shape)
        else:
            dx1 = a.dx1 + b.dx1
        return self._append("add", (a, b), value, dx1)

    def sub(self, a: Node, b: Node) -> Node:
        value = a.value - b.value
        if a.dx1 is None and b.dx1 is None:
            dx1 = None
        elif a.dx1 is None:
            dx1 = np.broadcast_to(-b.dx1, value.shape)
        elif b.dx1 is None:
            dx1 = np.broadcast_to(a.dx1, value.shape)
        else:
            dx1 = a.dx1 - b.dx1
        return self._append("sub", (a, b), value, dx1)

    def mul(self, a: Node, b: Node) -> Node:
        value = a.value * b.value
        terms = []
        if a.dx1 is not None:
            terms.append(a.dx1 * b.value)
        if b.dx1 is not None:
            terms.append(a.value * b.dx1)
        dx1 = None if not terms else (terms[0] if len(terms) == 1 else terms[0] + terms[1])
        if dx1 is not None:
            dx1 = np.broadcast_to(dx1, value.shape)
        return self._append("mul", (a, b), value, dx1)

    def div(self, a: Node, b: Node) -> Node:
        if np.any(b.value == 0.0):
            raise DomainError("division by zero on the tape")
        value = a.value / b.value
        terms = []
        if a.dx1 is not None:
            terms.append(a.dx1 / b.value)
        if b.dx1 is not None:
            terms.append(-a.value * b.dx1 / (b.value * b.value))
        dx1 = None if not terms else (terms[0] if len(terms) == 1 else terms[0] + terms[1])
        if dx1 is not None:
            dx1 = np.broadcast_to(dx1, value.shape)
        return self._append("div", (a, b), value, dx1)

    def neg(self, a: Node) -> Node:
        return self._append("neg", (a,), -a.value, None if a.dx1 is None else -a.dx1)

    # -- unary nonlinearities ------------------------------------------------

    def silu(self, a: Node) -> Node:
        s = sigmoid(a.value)
        value = a.value * s
        dx1 = None if a.dx1 is None else _silu_d1(a.value, s) * a.dx1
        return self._append("silu", (a,), value, dx1)

    def logistic(self, a: Node) -> Node:
        s = sigmoid(a.value)
        dx1 = None if a.dx1 is None else s * (1.0 - s) * a.dx1
        return self._append("logistic", (a,), s, dx1)

    def sqrt(self, a: Node) -> Node:
        if np.any(a.value < 0.0):
            raise DomainError("sqrt of a negative value on the tape")
        value = np.sqrt(a.value)
        dx1 = None if a.dx1 is None else a.dx1 / (2.0 * value)
        return self._append("sqrt", (a,), value, dx1)

    # -- contractions and structure -------------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        if a.value.ndim != 2 or b.value.ndim != 2:
            raise ValueError("matmul expects 2-D operands")
        value = a.value @ b.value
        terms = []
        if a.dx1 is not None:
            terms.append(a.dx1 @ b.value)
        if b.dx1 is not None:
            terms.append(a.value @ b.dx1)
        dx1 = None if not terms else (terms[0] if len(terms) == 1 else terms[0] + terms[1])
        return self._append("matmul", (a, b), value, dx1)

    def sum(self, a: Node, axis=None, keepdims=False) -> Node:
        value = a.value.sum(axis=axis, keepdims=keepdims)
        dx1 = None if a.dx1 is None else a.dx1.sum(axis=axis, keepdims=keepdims)
        node = self._append("sum", (a,), np.asarray(value, dtype=np.float64),
                            None if dx1 is None else np.asarray(dx1, dtype=np.float64))
        node_axis = axis
        node._sum_meta = (node_axis, keepdims)  # type: ignore[attr-defined]
        return node

    def tangent(self, a: Node) -> Node:
        """Read the dx1 channel of ``a`` as a composition-constant value."""
        value = np.zeros_like(a.value) if a.dx1 is None else np.array(a.dx1, copy=True)
        return self._append("tangent", (a,), value, None)

    # -- reverse sweep --------------------------------------------------------

    def backward(self, out: Node) -> dict[str, np.ndarray]:
        """Gradients of the scalar ``out.value`` with respect to all parameters."""
        if out.tape is not self:
            raise ValueError("output node belongs to a different tape")
        if out.value.size != 1:
            raise ValueError("backward expects a scalar output node")
        n = len(self.nodes)
        av: list[np.ndarray | None] = [None] * n  # adjoint of each value channel
        ad: list[np.ndarray | None] = [None] * n  # adjoint of each dx1 channel
        av[out.idx] = np.ones_like(out.value)

        def acc(store, node, delta):
            delta = _unbroadcast(np.asarray(delta, dtype=np.float64), node.value.shape)
            if store[node.idx] is None:
                store[node.idx] = np.zeros(node.value.shape, dtype=np.float64)
            store[node.idx] += delta

        for i in range(n - 1, -1, -1):
            gv, gd = av[i], ad[i]
            if gv is None and gd is None:
                continue
            node = self.nodes[i]
            for p in node.parents:
                if p.idx >= i:
                    raise RuntimeError("tape order violated: parent after child")
            op = node.op
            if op in ("const", "input", "param"):
                continue
            if op == "add":
                a, b = node.parents
                if gv is not None:
                    acc(av, a, gv)
                    acc(av, b, gv)
                if gd is not None:
                    acc(ad, a, gd)
                    acc(ad, b, gd)
            elif op == "sub":
                a, b = node.parents
                if gv is not None:
                    acc(av, a, gv)
                    acc(av, b, -gv)
                if gd is not None:
                    acc(ad, a, gd)
                    acc(ad, b, -gd)
            elif op == "neg":
                (a,) = node.parents
                if gv is not None:
                    acc(av, a, -gv)
                if gd is not None:
                    acc(ad, a, -gd)
            elif op == "mul":
                a, b = node.parents
                # c.v = a.v b.v ; c.d = a.d b.v + a.v b.d
                if gv is not None:
                    acc(av, a, gv * b.value)
                    acc(av, b, gv * a.value)
                if gd is not None:
                    if b.dx1 is not None:
                        acc(av, a, gd * b.dx1)
                    acc(ad, a, gd * b.value)
                    if a.dx1 is not None:
                        acc(av, b, gd * a.dx1)
                    acc(ad, b, gd * a.value)
            elif op == "div":
                a, b = node.parents
                bv = b.value
                inv = 1.0 / bv
                inv2 = inv * inv
                if gv is not None:
                    acc(av, a, gv * inv)
                    acc(av, b, -gv * a.value * inv2)
                if gd is not None:
                    # c.d = a.d/b.v - a.v b.d / b.v^2
                    if b.dx1 is not None:
                        acc(av, a, -gd * b.dx1 * inv2)
                    acc(ad, a, gd * inv)
                    term = np.zeros_like(bv)
                    if a.dx1 is not None:
                        term = term - a.dx1 * inv2
                    if b.dx1 is not None:
                        term = term + 2.0 * a.value * b.dx1 * inv2 * inv
                    acc(av, b, gd * term)
                    acc(ad, b, -gd * a.value * inv2)
            elif op in ("silu", "logistic", "sqrt"):
                (a,) = node.parents
                z = a.value
                if op == "silu":
                    s = sigmoid(z)
                    f1 = _silu_d1(z, s)
                    f2 = _silu_d2(z, s)
                elif op == "logistic":
                    s = node.value
                    f1 = s * (1.0 - s)
                    f2 = f1 * (1.0 - 2.0 * s)
                else:
                    f1 = 0.5 / node.value
                    f2 = -0.25 / (node.value * z)
                if gv is not None:
                    acc(av, a, gv * f1)
                if gd is not None:
                    if a.dx1 is not None:
                        acc(av, a, gd * f2 * a.dx1)
                    acc(ad, a, gd * f1)
            elif op == "matmul":
                a, b = node.parents
                if gv is not None:
                    acc(av, a, gv @ b.value.T)
                    acc(av, b, a.value.T @ gv)
                if gd is not None:
                    if b.dx1 is not None:
                        acc(av, a, gd @ b.dx1.T)
                    acc(ad, a, gd @ b.value.T)
                    if a.dx1 is not None:
                        acc(av, b, a.dx1.T @ gd)
                    acc(ad, b, a.value.T @ gd)
            elif op == "sum":
                (a,) = node.parents
                axis, keepdims = node._sum_meta  # type: ignore[attr-defined]
                for store, g in ((av, gv), (ad, gd)):
                    if g is None:
                        continue
                    g = np.asarray(g, dtype=np.float64)
                    if axis is not None and not keepdims:
                        g = np.expand_dims(g, axis=axis)
                    acc(store, a, np.broadcast_to(g, a.value.shape))
            elif op == "tangent":
                (a,) = node.parents
                # value channel of this node is the parent's dx1 channel;
                # the node's own dx1 adjoint is ignored (no second derivative)
                if gv is not None:
                    acc(ad, a, gv)
            else:  # pragma: no cover
                raise RuntimeError(f"unknown op {op!r}")

        grads: dict[str, np.ndarray] = {}
        for name, idx in self._param_idx.items():
            g = av[idx]
            grads[name] = np.zeros(self.nodes[idx].value.shape) if g is None else g
        return grads
