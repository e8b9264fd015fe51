"""Adam with bias correction and the exponential learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from .params import ModelParams

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros(cls, params):
        return cls({k: np.zeros(a.shape) for k, a in params.tensors.items()},
                   {k: np.zeros(a.shape) for k, a in params.tensors.items()}, 0)


def adam_step(params, grads, state, lr):
    """One Adam update; returns new ``(params, state)`` and leaves the inputs untouched.

    Moments are kept in float64, parameters are stored back as float32.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {name}")
    t = state.t + 1
    c1 = 1.0 - BETA1 ** t
    c2 = 1.0 - BETA2 ** t
    new_m, new_v, new_t = {}, {}, {}
    for name, theta in params.tensors.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != theta.shape:
            raise TrainingError(f"gradient shape {g.shape} != parameter shape {theta.shape} "
                                f"for {name}")
        m = BETA1 * state.m[name] + (1.0 - BETA1) * g
        v = BETA2 * state.v[name] + (1.0 - BETA2) * g * g
        step = lr * (m / c1) / (np.sqrt(v / c2) + EPS)
        new_t[name] = (theta.astype(np.float64) - step).astype(theta.dtype)
        new_m[name], new_v[name] = m, v
    return ModelParams(params.arch, new_t, params.preprocess), AdamState(new_m, new_v, t)


def lr_at(lr0, gamma, epoch):
    """``lr0 * gamma**epoch``, built by repeated multiplication.

    Repeated multiplication makes ``lr_at(e + 1) == gamma * lr_at(e)`` hold
    exactly, which ``gamma ** epoch`` does not guarantee.
    """
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    lr = float(lr0)
    for _ in range(epoch):
        lr = gamma * lr
    return lr
