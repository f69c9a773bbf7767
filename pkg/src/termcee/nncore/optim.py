"""Parameter storage and the Adam optimizer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NonFiniteError, Tensor


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


class ParamStore:
    """Named parameters in insertion order, plus Adam moments.

    Tensors created with ``trainable=False`` (frozen pre-computed embeddings)
    are stored and checkpointed but never updated.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Tensor] = {}
        self.adam = AdamState()

    def add(self, name: str, data: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name!r} already registered")
        t = Tensor(np.ascontiguousarray(data, dtype=self.dtype), requires_grad=trainable, name=name)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def trainable(self) -> dict[str, Tensor]:
        return {k: p for k, p in self.params.items() if p.requires_grad}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: p.data for k, p in self.params.items()}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            if arrays[k].shape != p.shape:
                raise ValueError(f"shape mismatch for {k}: {arrays[k].shape} vs {p.shape}")
            p.data = np.ascontiguousarray(arrays[k], dtype=self.dtype).copy()

    def count(self, trainable_only: bool = True) -> int:
        src = self.trainable() if trainable_only else self.params
        return int(sum(p.data.size for p in src.values()))


def grad_norm(store: ParamStore) -> float:
    total = 0.0
    for p in store.trainable().values():
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return float(np.sqrt(total))


def clip_grad_norm(store: ParamStore, max_norm: float) -> float:
    """Rescale all gradients so their global L2 norm is at most ``max_norm``."""
    norm = grad_norm(store)
    if norm > max_norm:
        factor = store.dtype.type(max_norm / (norm + 1e-12))
        for p in store.trainable().values():
            if p.grad is not None:
                p.grad = p.grad * factor
    return norm


def adam_step(store: ParamStore, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    params = store.trainable()
    for name, p in params.items():
        if p.grad is not None and not np.isfinite(p.grad).all():
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
    st = store.adam
    st.step += 1
    bc1 = 1.0 - beta1 ** st.step
    bc2 = 1.0 - beta2 ** st.step
    dt = store.dtype.type
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if name not in st.m:
            st.m[name] = np.zeros_like(p.data)
            st.v[name] = np.zeros_like(p.data)
        m, v = st.m[name], st.v[name]
        m *= dt(beta1)
        m += dt(1.0 - beta1) * g
        v *= dt(beta2)
        v += dt(1.0 - beta2) * (g * g)
        p.data -= dt(lr) * (m / dt(bc1)) / (np.sqrt(v / dt(bc2)) + dt(eps))
        p.grad = None
