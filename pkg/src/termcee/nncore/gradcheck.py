"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .optim import ParamStore
from .tensor import Tensor


@dataclass
class CoordCheck:
    param: str
    index: int
    analytic: float
    numeric: float

    @property
    def rel_err(self) -> float:
        a, n = self.analytic, self.numeric
        return abs(a - n) / max(abs(a), abs(n), 1e-8)


@dataclass
class GradCheckReport:
    tolerance: float
    checks: list[CoordCheck] = field(default_factory=list)

    @property
    def failures(self) -> list[CoordCheck]:
        return [c for c in self.checks if c.rel_err >= self.tolerance]

    @property
    def max_rel_err(self) -> float:
        return max((c.rel_err for c in self.checks), default=0.0)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        return (f"{len(self.checks)} coords, max rel err {self.max_rel_err:.3e}, "
                f"{len(self.failures)} failure(s) at tol {self.tolerance:g}")


def _choose_coords(grads: dict[str, np.ndarray], total: int, rng: np.random.Generator) -> list[tuple[str, int]]:
    # spread the budget over parameters; within one, prefer coordinates the loss touches
    names = list(grads)
    per = -(-total // len(names))
    coords = []
    for name in names:
        flat = grads[name].ravel()
        live = np.flatnonzero(flat)
        pool = live if live.size >= per else np.arange(flat.size)
        take = min(per, pool.size)
        coords.extend((name, int(i)) for i in rng.choice(pool, size=take, replace=False))
    return coords


def grad_check(f: Callable[[], Tensor], store: ParamStore, epsilon: float = 1e-3,
               tolerance: float = 1e-4, coords: int = 20, rng: np.random.Generator | None = None,
               params: Sequence[str] | None = None) -> GradCheckReport:
    """Compare backprop gradients of scalar ``f()`` with central differences.

    ``f`` must be deterministic (dropout off). Use a float64 store for
    tolerances near 1e-4; float32 round-off swamps the difference quotient.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    store.zero_grad()
    f().backward()
    names = list(params) if params is not None else list(store.trainable())
    grads = {}
    for name in names:
        p = store[name]
        grads[name] = p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
    store.zero_grad()
    report = GradCheckReport(tolerance)
    for name, idx in _choose_coords(grads, coords, rng):
        flat = store[name].data.reshape(-1)
        orig = flat[idx].copy()
        flat[idx] = orig + epsilon
        up = f().item()
        flat[idx] = orig - epsilon
        down = f().item()
        flat[idx] = orig
        report.checks.append(CoordCheck(name, idx, float(grads[name].reshape(-1)[idx]),
                                        (up - down) / (2 * epsilon)))
    return report
