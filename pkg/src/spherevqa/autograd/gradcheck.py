"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


def numeric_grad(f: Callable[[], Tensor], x: Tensor, eps: float = 1e-5,
                 coords: Sequence[int] | None = None) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. entries of ``x`` (mutated in place)."""
    flat = x.data.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    out = np.zeros(len(idx))
    for j, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f().data)
        flat[i] = orig - eps
        lo = float(f().data)
        flat[i] = orig
        out[j] = (hi - lo) / (2 * eps)
    return out


def relative_error(g_ad: np.ndarray, g_fd: np.ndarray) -> float:
    g_ad, g_fd = np.ravel(g_ad), np.ravel(g_fd)
    if g_ad.size == 0:
        return 0.0
    return float(np.max(np.abs(g_ad - g_fd)) / max(1.0, float(np.max(np.abs(g_fd)))))


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between autodiff and central differences of ``f(x)``."""
    x.requires_grad = True
    x.grad = None
    backward(f(x))
    g_ad = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
    g_fd = numeric_grad(lambda: f(x), x, eps)
    return relative_error(g_ad, g_fd)


def check_parameters(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
                     eps: float = 1e-5, coords_per_param: int | None = None,
                     rng: np.random.Generator | None = None) -> float:
    """Max relative error over (optionally sampled) coordinates of several parameters."""
    for p in params:
        p.grad = None
    backward(loss_fn())
    worst = 0.0
    for p in params:
        g_ad = np.zeros(p.size) if p.grad is None else p.grad.reshape(-1)
        if coords_per_param is None or coords_per_param >= p.size:
            coords = list(range(p.size))
        else:
            coords = sorted(rng.choice(p.size, coords_per_param, replace=False).tolist())
        g_fd = numeric_grad(loss_fn, p, eps, coords)
        worst = max(worst, relative_error(g_ad[coords], g_fd))
    return worst
