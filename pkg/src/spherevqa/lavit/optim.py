"""AdamW and the linear warmup/decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass
class AdamWState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def optimizer_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray | None],
                   state: AdamWState, lr: float, weight_decay: float = 0.01,
                   betas=BETAS, eps: float = ADAM_EPS) -> AdamWState:
    """One AdamW update applied in place to ``params``.

    Weight decay is decoupled: parameters shrink by ``lr * weight_decay``
    before the bias-corrected adaptive step. Non-finite gradients abort the
    whole step before anything is modified.
    """
    for i, g in enumerate(grads):
        if g is not None and not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {i}; step rejected")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    b1, b2 = betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if weight_decay:
            p -= lr * weight_decay * p
        if g is None:
            continue
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


class AdamW:
    def __init__(self, params, lr: float = 1e-3, weight_decay: float = 0.01):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.state = AdamWState()

    def step(self, lr: float | None = None) -> None:
        optimizer_step([p.data for p in self.params], [p.grad for p in self.params],
                       self.state, self.lr if lr is None else lr, self.weight_decay)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def lr_schedule(step: int, total_steps: int, base_lr: float, warmup: float = 0.1) -> float:
    """Linear ramp 0 -> base_lr over the first ``warmup`` fraction, then linear decay to 0."""
    if not 0 <= step <= total_steps:
        raise ValueError("step outside [0, total_steps]")
    w = warmup * total_steps
    if w > 0 and step < w:
        return base_lr * step / w
    if total_steps == w:
        return base_lr
    return base_lr * max(0.0, (total_steps - step) / (total_steps - w))
