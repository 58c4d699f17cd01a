"""Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParameterError


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.lr <= 0:
            raise ParameterError(f"lr must be > 0, got {self.lr}")


def adam_step(params, grads, state):
    """Apply one Adam update in place to each parameter tensor.

    ``params`` are :class:`~dcdetector.tensor.Tensor` leaves (or raw arrays),
    ``grads`` the matching arrays; ``None`` grads count as zero.
    """
    if len(params) != len(grads):
        raise ContractError(f"{len(params)} params but {len(grads)} grads")
    arrays = [getattr(p, "data", p) for p in params]
    if not state.m:
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
    if len(state.m) != len(arrays):
        raise ContractError("optimizer state does not match parameter list")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(a)
        if g.shape != a.shape or m.shape != a.shape:
            raise ContractError(f"grad shape {g.shape} does not match param shape {a.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        a -= update.astype(a.dtype, copy=False)


class Adam:
    """Convenience wrapper binding an :class:`AdamState` to a parameter list."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.state)


def clip_grad_norm(params, max_norm):
    """Rescale grads in place so their global L2 norm is at most ``max_norm``."""
    grads = [p.grad for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads)))
    if total > max_norm > 0:
        factor = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return total
