"""Dense numerical kernel: layers with hand-derived backwards, Adam, and
a finite-difference gradient checker.

Everything runs in float64; that is what makes central-difference
verification of every backward pass reliable. The layer math lives in a
swappable backend (compiled extension or NumPy fallback, see
:mod:`.backend`); this module adds parameters, the optimizer, and the
checker on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .backend import BACKEND_NAME, available_backends, ops

__all__ = [
    "BACKEND_NAME",
    "available_backends",
    "ops",
    "Parameter",
    "AdamState",
    "adam_step",
    "xavier_uniform",
    "finite_difference_check",
    "matmul",
    "matmul_backward",
    "affine_forward",
    "affine_backward",
    "gcn_forward",
    "gcn_backward",
    "mean_pool_forward",
    "mean_pool_backward",
    "mse_forward",
    "mse_backward",
]

# Re-export the selected backend's kernel set at package level.
matmul = ops.matmul
matmul_backward = ops.matmul_backward
affine_forward = ops.affine_forward
affine_backward = ops.affine_backward
gcn_forward = ops.gcn_forward
gcn_backward = ops.gcn_backward
mean_pool_forward = ops.mean_pool_forward
mean_pool_backward = ops.mean_pool_backward
mse_forward = ops.mse_forward
mse_backward = ops.mse_backward


class Parameter:
    """Named trainable matrix with an accumulated gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.ascontiguousarray(value, dtype=float)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[:] = 0.0

    @property
    def size(self) -> int:
        return self.value.size

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def xavier_uniform(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out))."""
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass
class AdamState:
    """Optimizer state: per-parameter moment estimates plus step counter."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Parameter], state: AdamState) -> None:
    """Apply one bias-corrected Adam update, then zero all gradients."""
    state.step += 1
    for p in params:
        if p.name not in state.m:
            state.m[p.name] = np.zeros_like(p.value)
            state.v[p.name] = np.zeros_like(p.value)
        ops.adam_update(
            p.value,
            p.grad,
            state.m[p.name],
            state.v[p.name],
            state.step,
            state.lr,
            state.beta1,
            state.beta2,
            state.eps,
        )
        p.zero_grad()


def finite_difference_check(
    loss_fn: Callable[[], float],
    params: Sequence[Parameter],
    h: float = 1e-5,
    coords_per_param: int = 32,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between stored analytic grads and central differences.

    ``loss_fn`` must be a deterministic pure forward pass; the caller is
    responsible for having populated every ``param.grad`` for the current
    parameter values before calling. A random subsample of at least
    ``coords_per_param`` coordinates per parameter is probed.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for p in params:
        flat_value = p.value.reshape(-1)
        flat_grad = p.grad.reshape(-1)
        n = flat_value.size
        if n <= coords_per_param:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=coords_per_param, replace=False)
        for idx in coords:
            original = flat_value[idx]
            flat_value[idx] = original + h
            up = loss_fn()
            flat_value[idx] = original - h
            down = loss_fn()
            flat_value[idx] = original
            g_fd = (up - down) / (2.0 * h)
            g_an = flat_grad[idx]
            rel = abs(g_an - g_fd) / max(1e-8, abs(g_an) + abs(g_fd))
            worst = max(worst, rel)
    return worst
