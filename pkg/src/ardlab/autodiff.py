"""Dense float64 tensors with reverse-mode automatic differentiation.

A small numpy-backed engine: just enough ops for MLP training, gradient-based
attacks, and input-gradient saliency maps. Every op output is checked for
NaN/Inf, all data is float64, and the only broadcasting allowed is adding a
bias vector over the batch dimension.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericError

__all__ = [
    "Tensor", "Graph", "backward", "grad_check",
    "add", "subtract", "multiply", "scale", "shift", "matmul", "relu",
    "softmax", "log", "log_softmax", "square", "sum", "mean",
    "l2_norm_sq", "amax", "clamp_min",
]

_builtin_sum = sum


def _as_array(data) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(data, dtype=np.float64))


class Tensor:
    """N-dimensional float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False, *, op: str = "leaf",
                 parents=(), grad_fn=None):
        arr = _as_array(data)
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite values in output of op '{op}'")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.op = op
        self._parents = tuple(parents)
        self._grad_fn = grad_fn

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def backward(self) -> None:
        """Populate grads of every requires_grad leaf reachable from self."""
        backward(Graph.trace(self), self)

    # arithmetic sugar; scalars go through scale/shift, tensors through
    # the strict-shape ops
    def __add__(self, other):
        if isinstance(other, (int, float)):
            return shift(self, float(other))
        return add(self, other)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return shift(self, -float(other))
        return subtract(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Graph:
    """Recorded op DAG; ``nodes`` is a topological order ending at the root."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes
        self._ids = {id(n) for n in nodes}

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, int]] = [(root, 0)]
        while stack:
            node, i = stack.pop()
            if i == 0:
                if id(node) in seen:
                    continue
                seen.add(id(node))
            if i < len(node._parents):
                stack.append((node, i + 1))
                parent = node._parents[i]
                if id(parent) not in seen:
                    stack.append((parent, 0))
            else:
                order.append(node)
        return cls(order)

    def __contains__(self, node: Tensor) -> bool:
        return id(node) in self._ids

    def __len__(self) -> int:
        return len(self.nodes)


def backward(graph: Graph, loss: Tensor) -> None:
    """Reverse-accumulate d(loss)/d(leaf) into every requires_grad leaf.

    ``loss`` must be a scalar node of ``graph``. Gradients accumulate into
    existing ``.grad`` buffers (call ``zero_grad`` between passes).
    """
    if loss not in graph:
        raise ContractError("loss is not a node of the given graph")
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    # restrict to ancestors of loss so mid-graph losses work too
    sub = graph if graph.nodes and graph.nodes[-1] is loss else Graph.trace(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(sub.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._grad_fn is None:
            if node.requires_grad and not node._parents:
                node.grad = np.array(g) if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            prev = grads.get(id(parent))
            grads[id(parent)] = np.array(pg) if prev is None else prev + pg


def _binary_requires(a: Tensor, b: Tensor) -> bool:
    return a.requires_grad or b.requires_grad


def add(a, b) -> Tensor:
    """Elementwise add; also allows [n,m] + [m] bias over the batch axis."""
    a, b = _wrap(a), _wrap(b)
    bias = a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]
    if not bias and a.shape != b.shape:
        raise ContractError(f"add shape mismatch: {a.shape} vs {b.shape}")
    req = _binary_requires(a, b)

    def grad_fn(g):
        return g, (g.sum(axis=0) if bias else g)

    return Tensor(a.data + b.data, req, op="add", parents=(a, b),
                  grad_fn=grad_fn if req else None)


def subtract(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.shape != b.shape:
        raise ContractError(f"subtract shape mismatch: {a.shape} vs {b.shape}")
    req = _binary_requires(a, b)

    def grad_fn(g):
        return g, -g

    return Tensor(a.data - b.data, req, op="subtract", parents=(a, b),
                  grad_fn=grad_fn if req else None)


def multiply(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.shape != b.shape:
        raise ContractError(f"multiply shape mismatch: {a.shape} vs {b.shape}")
    req = _binary_requires(a, b)

    def grad_fn(g):
        return g * b.data, g * a.data

    return Tensor(a.data * b.data, req, op="multiply", parents=(a, b),
                  grad_fn=grad_fn if req else None)


def scale(x, c: float) -> Tensor:
    x = _wrap(x)
    c = float(c)

    def grad_fn(g):
        return (c * g,)

    return Tensor(x.data * c, x.requires_grad, op="scale", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def shift(x, c: float) -> Tensor:
    x = _wrap(x)
    c = float(c)

    def grad_fn(g):
        return (g,)

    return Tensor(x.data + c, x.requires_grad, op="shift", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul needs [n,k]@[k,m], got {a.shape} @ {b.shape}")
    req = _binary_requires(a, b)

    def grad_fn(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor(a.data @ b.data, req, op="matmul", parents=(a, b),
                  grad_fn=grad_fn if req else None)


def relu(x) -> Tensor:
    x = _wrap(x)

    def grad_fn(g):
        # subgradient at 0 is 0
        return (g * (x.data > 0.0),)

    return Tensor(np.maximum(x.data, 0.0), x.requires_grad, op="relu",
                  parents=(x,), grad_fn=grad_fn if x.requires_grad else None)


def softmax(x) -> Tensor:
    """Row-stable softmax over the last axis (rows sum to 1)."""
    x = _wrap(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def grad_fn(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return Tensor(s, x.requires_grad, op="softmax", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def log_softmax(x) -> Tensor:
    """log(softmax(x)) over the last axis, computed without underflow."""
    x = _wrap(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse

    def grad_fn(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return Tensor(out, x.requires_grad, op="log_softmax", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def log(x) -> Tensor:
    x = _wrap(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)

    def grad_fn(g):
        return (g / x.data,)

    return Tensor(out, x.requires_grad, op="log", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def square(x) -> Tensor:
    x = _wrap(x)

    def grad_fn(g):
        return (2.0 * x.data * g,)

    return Tensor(x.data * x.data, x.requires_grad, op="square", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def _unreduce(g: np.ndarray, shape: tuple[int, ...], axis) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape)
    return np.broadcast_to(np.expand_dims(g, axis), shape)


def sum(x, axis: int | None = None) -> Tensor:
    x = _wrap(x)

    def grad_fn(g):
        return (_unreduce(g, x.shape, axis),)

    return Tensor(x.data.sum(axis=axis), x.requires_grad, op="sum", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def mean(x, axis: int | None = None) -> Tensor:
    x = _wrap(x)
    count = x.size if axis is None else x.shape[axis]

    def grad_fn(g):
        return (_unreduce(g, x.shape, axis) / count,)

    return Tensor(x.data.mean(axis=axis), x.requires_grad, op="mean", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def l2_norm_sq(x, axis: int | None = None) -> Tensor:
    """Sum of squares over all elements, or over one axis."""
    x = _wrap(x)

    def grad_fn(g):
        return (2.0 * x.data * _unreduce(g, x.shape, axis),)

    return Tensor((x.data * x.data).sum(axis=axis), x.requires_grad,
                  op="l2_norm_sq", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def amax(x, axis: int = -1) -> Tensor:
    """Max over one axis; subgradient flows to the first argmax."""
    x = _wrap(x)
    idx = np.argmax(x.data, axis=axis)

    def grad_fn(g):
        ga = np.zeros_like(x.data)
        np.put_along_axis(ga, np.expand_dims(idx, axis),
                          np.expand_dims(g, axis), axis=axis)
        return (ga,)

    return Tensor(x.data.max(axis=axis), x.requires_grad, op="amax", parents=(x,),
                  grad_fn=grad_fn if x.requires_grad else None)


def clamp_min(x, c: float) -> Tensor:
    """max(x, c) elementwise; gradient passes only where x > c."""
    x = _wrap(x)
    c = float(c)

    def grad_fn(g):
        return (g * (x.data > c),)

    return Tensor(np.maximum(x.data, c), x.requires_grad, op="clamp_min",
                  parents=(x,), grad_fn=grad_fn if x.requires_grad else None)


def grad_check(op, point, h: float = 1e-5, seed: int = 0) -> float:
    """Compare an op's analytic input-gradient against central differences.

    The op output (any shape) is reduced with a fixed random weight vector so
    a single scalar is differentiated both ways. Returns the max over input
    coordinates of |analytic - numeric| / max(1, |analytic|).
    """
    if not (1e-7 <= h <= 1e-3):
        raise ContractError(f"h={h} outside [1e-7, 1e-3]")
    x0 = _as_array(point.data if isinstance(point, Tensor) else point)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(np.asarray(op(Tensor(x0)).data).shape)

    def scalar(xv: np.ndarray) -> float:
        return float(np.asarray(op(Tensor(xv)).data * w).sum())

    x = Tensor(x0, requires_grad=True)
    out = sum(multiply(op(x), Tensor(w)))
    out.backward()
    analytic = x.grad
    numeric = np.empty_like(x0)
    flat = numeric.reshape(-1)
    base = x0.reshape(-1)
    for i in range(base.size):
        orig = base[i]
        base[i] = orig + h
        fp = scalar(x0)
        base[i] = orig - h
        fm = scalar(x0)
        base[i] = orig
        flat[i] = (fp - fm) / (2.0 * h)
    rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return float(rel.max())
