"""Dense tensors with a reverse-mode gradient tape.

Every op returns a new :class:`Tensor` holding its forward value and, when any
input needs a gradient, a closure mapping the upstream gradient to one
gradient per input. ``Tensor.backward`` walks the graph in reverse topological
order and accumulates into the ``grad`` of leaf tensors.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 dtype=np.float32):
        # numpy arrays and scalars keep their dtype; python data takes ``dtype``
        if isinstance(data, np.generic):
            data = np.asarray(data)
        self.data = data if isinstance(data, np.ndarray) else np.ascontiguousarray(data, dtype=dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self.name = name

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        """Wrap an op result; records ``backward`` only if some parent needs grad."""
        _check_finite(data)
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
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
    return order


def _check_finite(x: np.ndarray) -> None:
    if not np.isfinite(x).all():
        raise NonFiniteError("op produced a non-finite value")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


# ---------------------------------------------------------------- primitives

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} are incompatible")
    A, B = a.data, b.data
    return Tensor.from_op(A @ B, (a, b), lambda g: (g @ B.T, A.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a row vector broadcast over ``a``'s rows."""
    if a.shape == b.shape:
        return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g))
    if a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1]:
        return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    raise ShapeError(f"add shapes {a.shape} and {b.shape} are incompatible")


def add_all(terms: Sequence[Tensor]) -> Tensor:
    if not terms:
        raise ShapeError("add_all needs at least one term")
    shape = terms[0].shape
    if any(t.shape != shape for t in terms):
        raise ShapeError("add_all terms must share one shape")
    total = terms[0].data.copy()
    for t in terms[1:]:
        total = total + t.data
    return Tensor.from_op(total, tuple(terms), lambda g: [g] * len(terms))


def scale(a: Tensor, c: float) -> Tensor:
    c = a.data.dtype.type(c)
    return Tensor.from_op(a.data * c, (a,), lambda g: (g * c,))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    if len(tensors) == 1:
        return tensors[0]
    datas = [t.data for t in tensors]
    try:
        out = np.concatenate(datas, axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    bounds = np.cumsum([d.shape[axis] for d in datas])[:-1]

    def backward(g):
        return np.split(g, bounds, axis=axis)

    return Tensor.from_op(out, tuple(tensors), backward)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2 or not 0 <= start <= stop <= a.shape[1]:
        raise ShapeError(f"bad column slice [{start}:{stop}] of {a.shape}")
    shape, dtype = a.shape, a.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        full[:, start:stop] = g
        return (full,)

    return Tensor.from_op(np.ascontiguousarray(a.data[:, start:stop]), (a,), backward)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start <= stop <= a.shape[0]:
        raise ShapeError(f"bad row slice [{start}:{stop}] of {a.shape}")
    shape, dtype = a.shape, a.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        full[start:stop] = g
        return (full,)

    return Tensor.from_op(a.data[start:stop].copy(), (a,), backward)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return Tensor.from_op(y, (a,), lambda g: (g * (1 - y * y),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids exp overflow for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.data)
    return Tensor.from_op(y, (a,), lambda g: (g * y * (1 - y),))


def softmax_rows(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"softmax_rows expects a 2-D input, got {a.shape}")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return Tensor.from_op(y, (a,), backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None, train: bool = True) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate), eval is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0 or not train:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.dtype) * a.dtype.type(1.0 / (1.0 - rate))
    return Tensor.from_op(a.data * keep, (a,), lambda g: (g * keep,))


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding id out of range for table with {table.shape[0]} rows")
    shape, dtype = table.shape, table.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        np.add.at(full, ids, g)
        return (full,)

    return Tensor.from_op(table.data[ids], (table,), backward)


def weighted_nll(probs: Tensor, targets: np.ndarray, weights: np.ndarray, floor: float = 1e-12) -> Tensor:
    """-sum_i w[y_i] * log(p[i, y_i]) with log(0) guarded by ``floor``.

    The sum is accumulated in float64 and returned as a scalar of the input dtype.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if probs.data.ndim != 2 or targets.shape != (probs.shape[0],):
        raise ShapeError(f"targets {targets.shape} do not match probabilities {probs.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= probs.shape[1]):
        raise ShapeError("target tag outside the distribution width")
    rows = np.arange(targets.size)
    picked = probs.data[rows, targets].astype(np.float64)
    w = np.asarray(weights, dtype=np.float64)[targets]
    clipped = np.maximum(picked, floor)
    loss = -np.sum(w * np.log(clipped))
    shape, dtype = probs.shape, probs.dtype

    def backward(g):
        full = np.zeros(shape, dtype=np.float64)
        coef = np.where(picked > floor, -w / clipped, 0.0)
        full[rows, targets] = coef * float(g.reshape(()))
        return (full.astype(dtype),)

    return Tensor.from_op(np.array(loss, dtype=dtype), (probs,), backward)


def lstm(x: Tensor, W: Tensor, U: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """One-direction LSTM over the rows of ``x`` with zero initial state.

    Gate column blocks are ordered (input, forget, output, cell). With
    ``reverse`` the sequence is consumed last-to-first; outputs stay aligned to
    the input positions.
    """
    if x.data.ndim != 2 or W.shape[0] != x.shape[1]:
        raise ShapeError(f"lstm input {x.shape} does not match W {W.shape}")
    T = x.shape[0]
    H = U.shape[0]
    if T == 0:
        raise ShapeError("lstm needs a non-empty sequence")
    if W.shape[1] != 4 * H or U.shape != (H, 4 * H) or b.shape != (4 * H,):
        raise ShapeError(f"inconsistent lstm parameter shapes W{W.shape} U{U.shape} b{b.shape}")
    dtype = x.dtype
    X = x.data[::-1] if reverse else x.data
    Wd, Ud = W.data, U.data
    Z = X @ Wd + b.data
    h_all = np.zeros((T + 1, H), dtype=dtype)  # h_all[t] is the state before step t
    c_all = np.zeros((T + 1, H), dtype=dtype)
    gates = np.empty((T, 4 * H), dtype=dtype)
    tanh_c = np.empty((T, H), dtype=dtype)
    for t in range(T):
        z = Z[t] + h_all[t] @ Ud
        s = _sigmoid(z[:3 * H])
        g = np.tanh(z[3 * H:])
        gates[t, :3 * H] = s
        gates[t, 3 * H:] = g
        c = s[H:2 * H] * c_all[t] + s[:H] * g
        c_all[t + 1] = c
        tc = np.tanh(c)
        tanh_c[t] = tc
        h_all[t + 1] = s[2 * H:3 * H] * tc
    out = h_all[1:]
    out = np.ascontiguousarray(out[::-1]) if reverse else out.copy()

    def backward(gout):
        dH = gout[::-1] if reverse else gout
        dZ = np.empty((T, 4 * H), dtype=dtype)
        dh_next = np.zeros(H, dtype=dtype)
        dc_next = np.zeros(H, dtype=dtype)
        for t in range(T - 1, -1, -1):
            i, f, o = gates[t, :H], gates[t, H:2 * H], gates[t, 2 * H:3 * H]
            g = gates[t, 3 * H:]
            tc = tanh_c[t]
            dh = dH[t] + dh_next
            dc = dh * o * (1 - tc * tc) + dc_next
            dz = dZ[t]
            dz[:H] = dc * g * i * (1 - i)
            dz[H:2 * H] = dc * c_all[t] * f * (1 - f)
            dz[2 * H:3 * H] = dh * tc * o * (1 - o)
            dz[3 * H:] = dc * i * (1 - g * g)
            dc_next = dc * f
            dh_next = Ud @ dz
        dW = X.T @ dZ
        dU = h_all[:T].T @ dZ
        db = dZ.sum(axis=0)
        dX = dZ @ Wd.T
        if reverse:
            dX = np.ascontiguousarray(dX[::-1])
        return dX, dW, dU, db

    return Tensor.from_op(out, (x, W, U, b), backward)
