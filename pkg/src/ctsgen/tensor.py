"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

A `Graph` is the tape: operations executed through it append nodes in
creation order, which is already a topological order, so the backward pass
is a single reversed sweep with gradient buffers keyed by node.  Tracing is
opt-in — operations on tensors that do not belong to a graph just compute
values, which keeps inference paths cheap.

Conventions:
  * everything is float64; any non-finite result raises NumericError,
  * scalars are shape-() tensors,
  * max/min route their gradient to the first extremal element in flat
    (row-major) order, a deterministic sub-gradient choice,
  * a graph is single-threaded; tensors themselves are immutable values.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, NumericError, UsageError

Region = Sequence[tuple[int, int]]


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


class Tensor:
    """Immutable value node; carries a tape link only when traced."""

    __slots__ = ("data", "graph", "_idx", "_parents", "_backward")

    def __init__(self, value, graph: "Graph | None" = None,
                 parents: tuple["Tensor", ...] = (),
                 backward: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None):
        self.data = _as_array(value)
        self.graph = graph
        self._parents = parents
        self._backward = backward
        self._idx = graph._register(self) if graph is not None else -1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        """Row-major flat view of the stored values."""
        return self.data.reshape(-1)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        traced = "" if self.graph is None else f", node={self._idx}"
        return f"Tensor(shape={self.shape}{traced})"


class Graph:
    """Append-only tape of operations for one differentiable computation."""

    def __init__(self):
        self._nodes: list[Tensor] = []

    def _register(self, t: Tensor) -> int:
        self._nodes.append(t)
        return len(self._nodes) - 1

    def leaf(self, value) -> Tensor:
        """Create a differentiable input node."""
        return Tensor(value, graph=self)

    def backward(self, root: Tensor) -> dict[Tensor, Tensor]:
        """Gradients of a scalar `root` w.r.t. every leaf of this graph.

        Visits nodes exactly once, in reverse creation (= reverse
        topological) order, so results are bitwise reproducible.
        """
        if root.graph is not self:
            raise UsageError("root does not belong to this graph")
        if root.shape != ():
            raise UsageError(f"backward requires a scalar root, got shape {root.shape}")
        buffers: dict[int, np.ndarray] = {root._idx: np.ones((), dtype=np.float64)}
        for node in reversed(self._nodes[: root._idx + 1]):
            grad = buffers.get(node._idx)
            if grad is None or node._backward is None:
                continue
            parent_grads = node._backward(grad)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or parent.graph is not self:
                    continue
                buf = buffers.get(parent._idx)
                buffers[parent._idx] = pg if buf is None else buf + pg
        out: dict[Tensor, Tensor] = {}
        for node in self._nodes[: root._idx + 1]:
            if node._backward is None and node._parents == ():
                grad = buffers.get(node._idx)
                if grad is None:
                    grad = np.zeros(node.shape, dtype=np.float64)
                out[node] = Tensor(grad)
        return out


def _graph_of(inputs: Iterable[Tensor]) -> Graph | None:
    g = None
    for t in inputs:
        if t.graph is not None:
            if g is not None and t.graph is not g:
                raise UsageError("inputs belong to different graphs")
            g = t.graph
    return g


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite result in op '{op}'")
    return arr


def _elementwise_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ "
                             "(use broadcast for anything but scalars)")


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if shape == ():
        return np.asarray(grad.sum(), dtype=np.float64)
    return grad


def _binary(op: str, a: Tensor, b: Tensor, fn, bwd) -> Tensor:
    _elementwise_shapes(a, b, op)
    value = _check_finite(fn(a.data, b.data), op)
    graph = _graph_of((a, b))
    if graph is None:
        return Tensor(value)

    def backward(g: np.ndarray):
        ga, gb = bwd(g, a.data, b.data)
        return _reduce_to(ga, a.shape), _reduce_to(gb, b.shape)

    return Tensor(value, graph, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary("add", a, b, np.add, lambda g, x, y: (g * np.ones_like(x + y), g * np.ones_like(x + y)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary("sub", a, b, np.subtract, lambda g, x, y: (g * np.ones_like(x - y), -g * np.ones_like(x - y)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary("mul", a, b, np.multiply, lambda g, x, y: (g * y, g * x))


def div(a: Tensor, b: Tensor) -> Tensor:
    if np.any(b.data == 0.0):
        raise NumericError("div: division by zero")
    return _binary("div", a, b, np.divide, lambda g, x, y: (g / y, -g * x / (y * y)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    value = _check_finite(a.data @ b.data, "matmul")
    graph = _graph_of((a, b))
    if graph is None:
        return Tensor(value)

    def backward(g: np.ndarray):
        return g @ b.data.T, a.data.T @ g

    return Tensor(value, graph, (a, b), backward)


def _unary(op: str, a: Tensor, fn, bwd) -> Tensor:
    value = _check_finite(fn(a.data), op)
    graph = _graph_of((a,))
    if graph is None:
        return Tensor(value)
    return Tensor(value, graph, (a,), lambda g: (bwd(g, a.data, value),))


def relu(a: Tensor) -> Tensor:
    return _unary("relu", a, lambda x: np.maximum(x, 0.0), lambda g, x, y: g * (x > 0.0))


def tanh(a: Tensor) -> Tensor:
    return _unary("tanh", a, np.tanh, lambda g, x, y: g * (1.0 - y * y))


def sin(a: Tensor) -> Tensor:
    return _unary("sin", a, np.sin, lambda g, x, y: g * np.cos(x))


def exp(a: Tensor) -> Tensor:
    return _unary("exp", a, np.exp, lambda g, x, y: g * y)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise NumericError("log: non-positive argument")
    return _unary("log", a, np.log, lambda g, x, y: g / x)


def square(a: Tensor) -> Tensor:
    return _unary("square", a, np.square, lambda g, x, y: g * 2.0 * x)


def tsum(a: Tensor) -> Tensor:
    return _unary("sum", a, lambda x: np.asarray(x.sum()),
                  lambda g, x, y: g * np.ones_like(x))


def tmean(a: Tensor) -> Tensor:
    return _unary("mean", a, lambda x: np.asarray(x.mean()),
                  lambda g, x, y: g * np.ones_like(x) / x.size)


def _extremum(op: str, a: Tensor, reduce_fn, arg_fn) -> Tensor:
    if a.data.size == 0:
        raise DimensionError(f"{op}: empty tensor")
    value = np.asarray(reduce_fn(a.data))
    _check_finite(value, op)
    graph = _graph_of((a,))
    if graph is None:
        return Tensor(value)
    flat_idx = int(arg_fn(a.data))  # first extremal element in flat order

    def backward(g: np.ndarray):
        out = np.zeros_like(a.data)
        out.reshape(-1)[flat_idx] = g
        return (out,)

    return Tensor(value, graph, (a,), backward)


def tmax(a: Tensor) -> Tensor:
    return _extremum("max", a, np.max, np.argmax)


def tmin(a: Tensor) -> Tensor:
    return _extremum("min", a, np.min, np.argmin)


def slice_(a: Tensor, region: Region) -> Tensor:
    if len(region) != a.data.ndim:
        raise DimensionError(f"slice: region rank {len(region)} != tensor rank {a.data.ndim}")
    key = []
    for dim, (start, stop) in zip(a.shape, region):
        if not (0 <= start < stop <= dim):
            raise DimensionError(f"slice: range ({start},{stop}) out of [0,{dim}]")
        key.append(slice(start, stop))
    key_t = tuple(key)
    value = a.data[key_t].copy()
    graph = _graph_of((a,))
    if graph is None:
        return Tensor(value)

    def backward(g: np.ndarray):
        out = np.zeros_like(a.data)
        out[key_t] = g
        return (out,)

    return Tensor(value, graph, (a,), backward)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise DimensionError("concat: no inputs")
    try:
        value = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from exc
    _check_finite(value, "concat")
    graph = _graph_of(parts)
    if graph is None:
        return Tensor(value)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray):
        grads = []
        for i in range(len(parts)):
            key = [slice(None)] * g.ndim
            key[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(key)])
        return tuple(grads)

    return Tensor(value, graph, tuple(parts), backward)


def broadcast(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        value = np.broadcast_to(a.data, shape).copy()
    except ValueError as exc:
        raise DimensionError(f"broadcast: {exc}") from exc
    graph = _graph_of((a,))
    if graph is None:
        return Tensor(value)
    src = a.shape

    def backward(g: np.ndarray):
        grad = g
        extra = grad.ndim - len(src)
        if extra:
            grad = grad.sum(axis=tuple(range(extra)))
        keep = tuple(i for i, s in enumerate(src) if s == 1 and grad.shape[i] != 1)
        if keep:
            grad = grad.sum(axis=keep, keepdims=True)
        return (grad.reshape(src),)

    return Tensor(value, graph, (a,), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        value = a.data.reshape(shape).copy()
    except ValueError as exc:
        raise DimensionError(f"reshape: {exc}") from exc
    graph = _graph_of((a,))
    if graph is None:
        return Tensor(value)
    return Tensor(value, graph, (a,), lambda g: (g.reshape(a.shape),))


_OPS = {
    "add": add, "sub": sub, "mul": mul, "div": div, "matmul": matmul,
    "relu": relu, "tanh": tanh, "sin": sin, "exp": exp, "log": log,
    "square": square, "sum": tsum, "mean": tmean, "max": tmax, "min": tmin,
    "slice": slice_, "concat": concat, "broadcast": broadcast,
    "reshape": reshape,
}


def forward_op(kind: str, inputs: Sequence[Tensor], **params) -> Tensor:
    """Dispatch an operation by name.

    `slice` takes region=[(start, stop), ...], `broadcast`/`reshape` take
    shape=..., `concat` takes axis=... and the whole input list.
    """
    if kind not in _OPS:
        raise UsageError(f"unknown op kind '{kind}'")
    fn = _OPS[kind]
    if kind == "concat":
        return fn(list(inputs), **params)
    return fn(*inputs, **params)
