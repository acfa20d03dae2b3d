"""Minimal reverse-mode tape over the fixed operation set of the losses.

Nodes hold float64 ndarrays. The op set is exactly what the contrastive
objectives need: matrix products, row normalization, tanh, row-wise and
pairwise dot/squared-distance, stabilized log-sum-exp, concatenation,
diagonal extraction, slicing/reshape, and arithmetic. Gradients of every
objective built on these ops are validated against central finite
differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch

# Selftest harness hook: flipping this to -1.0 corrupts every gradient so the
# finite-difference suite can prove it detects a broken gradient path.
_HARNESS_GRAD_SIGN = 1.0


class Var:
    """A tape node: an ndarray value plus the closures to backpropagate."""

    __slots__ = ("value", "grad", "_inputs", "_vjp")

    def __init__(self, value, inputs=(), vjp=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self._inputs = inputs
        self._vjp = vjp

    # -- arithmetic (scalar or broadcastable ndarray constants allowed) --
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(other, -1.0) if isinstance(other, Var) else -_c(other))

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __mul__(self, other):
        if isinstance(other, Var):
            return multiply(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a Var is not part of the op set")
        return scale(self, 1.0 / other)


def _c(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcasted gradient back to the input shape."""
    g = np.asarray(g, dtype=float)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Var, b) -> Var:
    if isinstance(b, Var):
        out = Var(a.value + b.value, (a, b))
        out._vjp = lambda g: (
            _unbroadcast(g, a.value.shape),
            _unbroadcast(g, b.value.shape),
        )
        return out
    bc = _c(b)
    out = Var(a.value + bc, (a,))
    out._vjp = lambda g: (_unbroadcast(g, a.value.shape),)
    return out


def scale(a: Var, alpha) -> Var:
    alpha = _c(alpha)
    out = Var(a.value * alpha, (a,))
    out._vjp = lambda g: (_unbroadcast(g * alpha, a.value.shape),)
    return out


def multiply(a: Var, b: Var) -> Var:
    out = Var(a.value * b.value, (a, b))
    out._vjp = lambda g: (
        _unbroadcast(g * b.value, a.value.shape),
        _unbroadcast(g * a.value, b.value.shape),
    )
    return out


def matmul(a, b) -> Var:
    """a @ b where either operand may be a constant ndarray."""
    av = a.value if isinstance(a, Var) else _c(a)
    bv = b.value if isinstance(b, Var) else _c(b)
    inputs = tuple(x for x in (a, b) if isinstance(x, Var))
    out = Var(av @ bv, inputs)

    def vjp(g):
        grads = []
        if isinstance(a, Var):
            grads.append(g @ bv.T)
        if isinstance(b, Var):
            grads.append(av.T @ g)
        return tuple(grads)

    out._vjp = vjp
    return out


def transpose(a: Var) -> Var:
    out = Var(a.value.T, (a,))
    out._vjp = lambda g: (g.T,)
    return out


def reshape(a: Var, shape) -> Var:
    old = a.value.shape
    out = Var(a.value.reshape(shape), (a,))
    out._vjp = lambda g: (g.reshape(old),)
    return out


def take_slice(a: Var, start: int, stop: int) -> Var:
    """1-D slice a[start:stop] (used to unpack flattened parameter blocks)."""
    if a.value.ndim != 1:
        raise ShapeMismatch("take_slice expects a flat parameter vector")
    out = Var(a.value[start:stop], (a,))

    def vjp(g):
        full = np.zeros_like(a.value)
        full[start:stop] = g
        return (full,)

    out._vjp = vjp
    return out


def concat_cols(parts) -> Var:
    """Column-wise concatenation of 2-D Vars."""
    vals = [p.value for p in parts]
    out = Var(np.concatenate(vals, axis=1), tuple(parts))
    splits = np.cumsum([v.shape[1] for v in vals])[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=1))

    out._vjp = vjp
    return out


def diag_of(a: Var) -> Var:
    n = a.value.shape[0]
    out = Var(np.diagonal(a.value).copy(), (a,))

    def vjp(g):
        full = np.zeros_like(a.value)
        full[np.arange(n), np.arange(n)] = g
        return (full,)

    out._vjp = vjp
    return out


def rowwise_dot(a: Var, b) -> Var:
    """sum(a * b, axis=1) for matching (n, d) operands."""
    bv = b.value if isinstance(b, Var) else _c(b)
    inputs = (a, b) if isinstance(b, Var) else (a,)
    out = Var(np.sum(a.value * bv, axis=1), inputs)

    def vjp(g):
        grads = [g[:, None] * bv]
        if isinstance(b, Var):
            grads.append(g[:, None] * a.value)
        return tuple(grads)

    out._vjp = vjp
    return out


def rowwise_sqdist(a: Var, b: Var) -> Var:
    """sum((a - b)^2, axis=1) rowwise."""
    diff = a.value - b.value
    out = Var(np.sum(diff * diff, axis=1), (a, b))
    out._vjp = lambda g: (2.0 * g[:, None] * diff, -2.0 * g[:, None] * diff)
    return out


def pairwise_sqdist(a: Var, b) -> Var:
    """Squared distances ||a_i - b_j||^2 as an (n, m) matrix."""
    av = a.value
    bv = b.value if isinstance(b, Var) else _c(b)
    sq = (
        np.sum(av * av, axis=1)[:, None]
        + np.sum(bv * bv, axis=1)[None, :]
        - 2.0 * (av @ bv.T)
    )
    inputs = (a, b) if isinstance(b, Var) else (a,)
    out = Var(np.maximum(sq, 0.0), inputs)

    def vjp(g):
        ga = 2.0 * (av * g.sum(axis=1)[:, None] - g @ bv)
        if isinstance(b, Var):
            gb = 2.0 * (bv * g.sum(axis=0)[:, None] - g.T @ av)
            return (ga, gb)
        return (ga,)

    out._vjp = vjp
    return out


def normalize_rows(a: Var) -> Var:
    norms = np.linalg.norm(a.value, axis=1, keepdims=True)
    if np.any(norms <= 1e-12):
        raise NonFiniteLoss("row with near-zero norm inside normalize head")
    z = a.value / norms
    out = Var(z, (a,))

    def vjp(g):
        # Tangent projection: gradient is orthogonal to each output row.
        return ((g - z * np.sum(g * z, axis=1, keepdims=True)) / norms,)

    out._vjp = vjp
    return out


def tanh_(a: Var) -> Var:
    y = np.tanh(a.value)
    out = Var(y, (a,))
    out._vjp = lambda g: (g * (1.0 - y * y),)
    return out


def logsumexp_rows(a: Var) -> Var:
    """Row-wise log-sum-exp with max subtraction."""
    m = np.max(a.value, axis=1, keepdims=True)
    e = np.exp(a.value - m)
    s = np.sum(e, axis=1, keepdims=True)
    out = Var((m + np.log(s))[:, 0], (a,))
    softmax = e / s
    out._vjp = lambda g: (softmax * g[:, None],)
    return out


def sum_(a: Var) -> Var:
    out = Var(np.sum(a.value), (a,))
    out._vjp = lambda g: (np.full_like(a.value, float(g)),)
    return out


def mean_(a: Var) -> Var:
    n = a.value.size
    out = Var(np.mean(a.value), (a,))
    out._vjp = lambda g: (np.full_like(a.value, float(g) / n),)
    return out


def backward(root: Var) -> None:
    """Accumulate gradients of a scalar root into every reachable leaf."""
    if root.value.ndim != 0:
        raise ShapeMismatch("backward needs a scalar root")
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._inputs:
            stack.append((parent, False))
    for node in order:
        node.grad = None
    root.grad = np.asarray(1.0)
    for node in reversed(order):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._inputs, node._vjp(node.grad)):
            parent.grad = g if parent.grad is None else parent.grad + g


def loss_and_grad(lossfn, params: np.ndarray):
    """Evaluate a scalar tape function and its gradient at flat params.

    lossfn maps a flat leaf Var to a scalar Var. Raises NonFiniteLoss when
    the value or gradient is non-finite.
    """
    leaf = Var(np.asarray(params, dtype=float))
    out = lossfn(leaf)
    value = float(out.value)
    if not np.isfinite(value):
        raise NonFiniteLoss("loss evaluated to a non-finite value")
    backward(out)
    grad = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
    grad = np.asarray(grad, dtype=float) * _HARNESS_GRAD_SIGN
    if not np.all(np.isfinite(grad)):
        raise NonFiniteLoss("gradient contains non-finite entries")
    return value, grad


def finite_diff_grad(lossfn, params: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient oracle, one coordinate at a time."""
    if not h > 0:
        raise ValueError("step h must be positive")
    p = np.asarray(params, dtype=float).copy()
    grad = np.zeros_like(p)
    for i in range(p.size):
        old = p[i]
        p[i] = old + h
        fp = float(lossfn(Var(p)).value)
        p[i] = old - h
        fm = float(lossfn(Var(p)).value)
        p[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteLoss("finite differences hit a non-finite evaluation")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad
