"""Adam (beta1=0, beta2=0.9), the three-phase learning-rate schedule, and a
central finite-difference gradient used to check analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, ShapeError

BATCH_SIZE = 8


@dataclass(frozen=True)
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.9
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``.

    ``params`` and ``grads`` map names to arrays. Inputs are not modified.
    """
    if params.keys() != grads.keys():
        raise ShapeError(f"param/grad names differ: {sorted(set(params) ^ set(grads))}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(f"{name}: grad shape {g.shape} != param shape {p.shape}")
        m = b1 * state.m.get(name, np.zeros_like(p)) + (1 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(p)) + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name], new_v[name] = m, v
    return new_params, replace(state, t=t, m=new_m, v=new_v)


@dataclass(frozen=True)
class Schedule:
    """Generator learning rate per phase; discriminators run at one tenth."""

    generator_lrs: tuple = (1e-4, 1e-5, 1e-6)
    d_ratio: float = 0.1
    batch_size: int = BATCH_SIZE

    def generator_lr(self, phase: int) -> float:
        if not 0 <= phase < len(self.generator_lrs):
            raise ParameterError(f"phase must be in [0, {len(self.generator_lrs)}), got {phase}")
        return self.generator_lrs[phase]

    def discriminator_lr(self, phase: int) -> float:
        return self.generator_lr(phase) * self.d_ratio

    @property
    def phases(self) -> int:
        return len(self.generator_lrs)


def finite_diff_grad(f, x, h: float = 1e-4) -> np.ndarray:
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h`` per element."""
    if h <= 0:
        raise ParameterError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(x)
        flat[i] = orig - h
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad
