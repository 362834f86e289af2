"""Dense float64 tensors with reverse-mode automatic differentiation.

A dynamic tape: every operation allocates a fresh ``Tensor`` that remembers
its parents and a closure propagating the output adjoint to them.
``backward`` walks the graph once in reverse topological order and
accumulates adjoints additively into ``.grad``, so parameters shared by
several forward passes receive the sum of their contributions and ``.grad``
survives across calls until ``zero_grad``.

Only what the statistics network and the regularized loss need is
implemented: matmul, broadcast elementwise arithmetic, tanh/relu/exp/log,
full reductions, column concat, row gather/slice, the two vector norms and
a max-shifted log-mean-exp. Everything is float64; there is no view
aliasing, each op copies.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_DEBUG_CHECKS = False


def set_debug_checks(enabled: bool) -> None:
    """Globally toggle NaN/Inf validation of every created tensor."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = enabled


@contextmanager
def debug_checks():
    """Enable finiteness validation within a block (test helper)."""
    global _DEBUG_CHECKS
    prev = _DEBUG_CHECKS
    _DEBUG_CHECKS = True
    try:
        yield
    finally:
        _DEBUG_CHECKS = prev


class Tensor:
    """Immutable-by-convention float64 array node on the tape."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf",
                 _parents: tuple = (), _backward=None):
        arr = np.asarray(data, dtype=np.float64)
        if _DEBUG_CHECKS and not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite values in tensor from op '{op}'")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.op = op
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, op={self.op}{flag})"

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return _elementwise("add", self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return _elementwise("sub", self, _as_tensor(other))

    def __rsub__(self, other):
        return _elementwise("sub", _as_tensor(other), self)

    def __mul__(self, other):
        return _elementwise("mul", self, _as_tensor(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _elementwise("div", self, _as_tensor(other))

    def __rtruediv__(self, other):
        return _elementwise("div", _as_tensor(other), self)

    def __neg__(self):
        out = _node(-self.data, "neg", (self,))
        if out.requires_grad:
            def backward(g, t=self):
                _accum(t, -g)
            out._backward = backward
        return out

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    # -- unary transforms ----------------------------------------------

    def tanh(self):
        y = np.tanh(self.data)
        out = _node(y, "tanh", (self,))
        if out.requires_grad:
            def backward(g, t=self, y=y):
                _accum(t, g * (1.0 - y * y))
            out._backward = backward
        return out

    def relu(self):
        y = np.maximum(self.data, 0.0)
        out = _node(y, "relu", (self,))
        if out.requires_grad:
            mask = self.data > 0.0
            def backward(g, t=self, mask=mask):
                _accum(t, g * mask)
            out._backward = backward
        return out

    def exp(self):
        y = np.exp(self.data)
        out = _node(y, "exp", (self,))
        if out.requires_grad:
            def backward(g, t=self, y=y):
                _accum(t, g * y)
            out._backward = backward
        return out

    def log(self):
        y = np.log(self.data)
        out = _node(y, "log", (self,))
        if out.requires_grad:
            def backward(g, t=self):
                _accum(t, g / t.data)
            out._backward = backward
        return out

    def mean(self):
        out = _node(self.data.mean(), "mean", (self,))
        if out.requires_grad:
            def backward(g, t=self):
                _accum(t, np.full(t.data.shape, float(g) / t.data.size))
            out._backward = backward
        return out

    def sum(self):
        out = _node(self.data.sum(), "sum", (self,))
        if out.requires_grad:
            def backward(g, t=self):
                _accum(t, np.full(t.data.shape, float(g)))
            out._backward = backward
        return out

    def reshape(self, *shape):
        out = _node(self.data.reshape(shape), "reshape", (self,))
        if out.requires_grad:
            def backward(g, t=self):
                _accum(t, g.reshape(t.data.shape))
            out._backward = backward
        return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, op: str, parents: tuple) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs, op=op,
                  _parents=parents if needs else ())


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce an adjoint back to the operand shape it was broadcast from."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _elementwise(kind: str, a: Tensor, b: Tensor) -> Tensor:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(
            f"{kind}: shapes {a.data.shape} and {b.data.shape} do not broadcast"
        ) from None
    if kind == "add":
        data = a.data + b.data
    elif kind == "sub":
        data = a.data - b.data
    elif kind == "mul":
        data = a.data * b.data
    else:
        data = a.data / b.data
    out = _node(data, kind, (a, b))
    if not out.requires_grad:
        return out

    if kind == "add":
        def backward(g, a=a, b=b):
            _accum(a, _unbroadcast(g, a.data.shape))
            _accum(b, _unbroadcast(g, b.data.shape))
    elif kind == "sub":
        def backward(g, a=a, b=b):
            _accum(a, _unbroadcast(g, a.data.shape))
            _accum(b, _unbroadcast(-g, b.data.shape))
    elif kind == "mul":
        def backward(g, a=a, b=b):
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
            _accum(b, _unbroadcast(g * a.data, b.data.shape))
    else:
        def backward(g, a=a, b=b):
            _accum(a, _unbroadcast(g / b.data, a.data.shape))
            _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))
    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: shapes {a.data.shape} and {b.data.shape} do not conform"
        )
    out = _node(a.data @ b.data, "matmul", (a, b))
    if out.requires_grad:
        def backward(g, a=a, b=b):
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)
        out._backward = backward
    return out


def concat_columns(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 2-D blocks along axis 1."""
    if not parts:
        raise ContractError("concat_columns of an empty sequence")
    rows = {p.data.shape[0] for p in parts}
    if any(p.data.ndim != 2 for p in parts) or len(rows) != 1:
        raise ShapeError(
            f"concat_columns: incompatible shapes {[p.data.shape for p in parts]}"
        )
    out = _node(np.concatenate([p.data for p in parts], axis=1),
                "concat", tuple(parts))
    if out.requires_grad:
        widths = [p.data.shape[1] for p in parts]
        def backward(g, parts=tuple(parts), widths=widths):
            col = 0
            for p, w in zip(parts, widths):
                _accum(p, g[:, col:col + w])
                col += w
        out._backward = backward
    return out


def gather_rows(table: Tensor, indices) -> Tensor:
    """Select rows of a 2-D table by integer index (embedding lookup)."""
    idx = np.asarray(indices)
    if table.data.ndim != 2 or idx.ndim != 1:
        raise ShapeError(
            f"gather_rows: table {table.data.shape}, indices {idx.shape}"
        )
    out = _node(table.data[idx], "gather_rows", (table,))
    if out.requires_grad:
        def backward(g, t=table, idx=idx):
            buf = np.zeros_like(t.data)
            np.add.at(buf, idx, g)
            _accum(t, buf)
        out._backward = backward
    return out


def slice_rows(t: Tensor, start: int, stop: int) -> Tensor:
    if t.data.ndim < 1 or not (0 <= start <= stop <= t.data.shape[0]):
        raise ShapeError(f"slice_rows [{start}:{stop}] on shape {t.data.shape}")
    out = _node(t.data[start:stop].copy(), "slice_rows", (t,))
    if out.requires_grad:
        def backward(g, t=t, start=start, stop=stop):
            buf = np.zeros_like(t.data)
            buf[start:stop] = g
            _accum(t, buf)
        out._backward = backward
    return out


def l1_norm(t: Tensor) -> Tensor:
    out = _node(np.abs(t.data).sum(), "l1_norm", (t,))
    if out.requires_grad:
        def backward(g, t=t):
            _accum(t, float(g) * np.sign(t.data))
        out._backward = backward
    return out


def l2_norm(t: Tensor) -> Tensor:
    norm = float(np.sqrt((t.data * t.data).sum()))
    out = _node(norm, "l2_norm", (t,))
    if out.requires_grad:
        def backward(g, t=t, norm=norm):
            # subgradient 0 at the origin; callers guard the degenerate case
            denom = norm if norm > 0.0 else 1.0
            _accum(t, float(g) * t.data / denom)
        out._backward = backward
    return out


def log_mean_exp(t: Tensor) -> Tensor:
    """log(mean(exp(t))) over all elements, max-shifted for stability."""
    flat = t.data.reshape(-1)
    m = float(flat.max())
    shifted = np.exp(flat - m)
    out = _node(m + np.log(shifted.mean()), "log_mean_exp", (t,))
    if out.requires_grad:
        weights = (shifted / shifted.sum()).reshape(t.data.shape)
        def backward(g, t=t, weights=weights):
            _accum(t, float(g) * weights)
        out._backward = backward
    return out


def backward(loss: Tensor) -> dict:
    """Propagate adjoints from a scalar loss; returns {leaf: grad}.

    Gradients accumulate into ``.grad`` without zeroing, so calling twice
    (or reusing a parameter in two passes) sums contributions.
    """
    if loss.data.size != 1:
        raise ContractError(
            f"backward needs a scalar loss, got shape {loss.data.shape}"
        )
    if not loss.requires_grad:
        return {}

    order: list[Tensor] = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    _accum(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)

    return {n: n.grad for n in order if n._backward is None and n.grad is not None}


def global_grad_norm(params: Iterable[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    return float(np.sqrt(total))


def clip_global_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm.
    """
    params = list(params)
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm
