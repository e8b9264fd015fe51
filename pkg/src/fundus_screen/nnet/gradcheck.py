"""Central-difference verification of :func:`backward`."""
from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from .model import backward, cross_entropy, forward
from .params import ArchDescriptor, init_params

TINY = ArchDescriptor(variant="multilevel", input_size=8, stage_channels=(2, 2, 2, 2),
                      tap_stages=(1, 2, 3), head_hidden=4)

# denominator floor so gradients that are zero up to roundoff do not blow up the ratio
REL_FLOOR = 1e-7


def relative_error(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)


def _loss(params, x, y):
    logits, _ = forward(params, x)
    return cross_entropy(logits, y)[0]


def check_gradients(params, x, y, eps=1e-6):
    """Per-parameter max relative error of analytic vs central-difference gradients.

    ``params`` should hold float64 tensors; they are perturbed in place and
    restored.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be > 0, got {eps}")
    logits, cache = forward(params, x)
    _, dlogits = cross_entropy(logits, y)
    grads = backward(params, cache, dlogits)
    worst = {}
    for name, theta in params.tensors.items():
        numeric = np.empty(theta.shape)
        flat = theta.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = _loss(params, x, y)
            flat[i] = orig - eps
            down = _loss(params, x, y)
            flat[i] = orig
            nflat[i] = (up - down) / (2 * eps)
        worst[name] = float(relative_error(grads[name], numeric).max())
    return worst, grads


def grad_check(arch=TINY, seed=0, eps=1e-6, batch=4):
    """Worst relative gradient error over every parameter of a random model."""
    if not eps > 0:
        raise ParameterError(f"eps must be > 0, got {eps}")
    rng = np.random.default_rng(seed)
    params = init_params(arch, seed).astype(np.float64)
    # non-zero biases keep pre-activations away from the ReLU kink at exactly zero
    for name, t in params.tensors.items():
        if name.endswith(".b"):
            t[...] = rng.normal(0.0, 0.1, t.shape)
    s = arch.input_size
    x = rng.uniform(0.0, 1.0, (batch, 3, s, s))
    y = np.arange(batch) % 2
    worst, _ = check_gradients(params, x, y, eps)
    return max(worst.values())
