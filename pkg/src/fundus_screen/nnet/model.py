"""MiniNet forward and backward passes.

All arithmetic runs in float64; parameters are upcast on entry. Activations
live in NCHW between stages and as (N*H*W, C) row blocks inside a stage,
which is the layout the im2col matmul produces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ShapeError
from ..imaging import to_network_input

KSIZE, STRIDE, PAD = 3, 2, 1


@dataclass
class StageCache:
    in_shape: tuple
    cols: np.ndarray
    pre: np.ndarray
    act: np.ndarray
    out_hw: tuple


@dataclass
class ForwardCache:
    arch: object
    shapes: dict
    batch: int
    stages: list
    pooled: list
    features: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray


def _check_batch(arch, batch):
    if batch.ndim != 4 or batch.shape[1] != 3:
        raise ShapeError("input", f"expected (N, 3, S, S) batch, got shape {batch.shape}")
    s = arch.input_size
    if batch.shape[2:] != (s, s):
        raise ShapeError("input", f"spatial size {batch.shape[2]}x{batch.shape[3]} "
                                  f"does not match arch input_size {s}")
    if batch.shape[0] < 1:
        raise ShapeError("input", "empty batch")


def forward(params, batch):
    """Return ``(logits[N, 2], cache)``."""
    arch = params.arch
    batch = np.asarray(batch, dtype=np.float64)
    _check_batch(arch, batch)
    t = {k: np.asarray(v, dtype=np.float64) for k, v in params.tensors.items()}
    n = batch.shape[0]

    x = batch
    stages, pooled = [], []
    for i in range(arch.n_stages):
        w = t[f"stage{i}.w"]
        if x.shape[1] != w.shape[1]:
            raise ShapeError(f"stage{i}", f"expects {w.shape[1]} input channels, got {x.shape[1]}")
        cols = kernels.im2col(x, KSIZE, STRIDE, PAD)
        ho = (x.shape[2] + 2 * PAD - KSIZE) // STRIDE + 1
        wo = (x.shape[3] + 2 * PAD - KSIZE) // STRIDE + 1
        pre = cols @ w.reshape(w.shape[0], -1).T + t[f"stage{i}.b"]
        act = np.maximum(pre, 0.0)
        stages.append(StageCache(x.shape, cols, pre, act, (ho, wo)))
        if i in arch.tap_stages:
            pooled.append(act.reshape(n, ho * wo, -1).mean(axis=1))
        x = act.reshape(n, ho, wo, -1).transpose(0, 3, 1, 2)

    features = np.concatenate(pooled, axis=1)
    if features.shape[1] != arch.feature_width:
        raise ShapeError("concat", f"width {features.shape[1]} != {arch.feature_width}")
    hidden_pre = features @ t["fc1.w"] + t["fc1.b"]
    hidden = np.maximum(hidden_pre, 0.0)
    logits = hidden @ t["fc2.w"] + t["fc2.b"]
    shapes = {k: v.shape for k, v in params.tensors.items()}
    cache = ForwardCache(arch, shapes, n, stages, pooled, features, hidden_pre, hidden)
    return logits, cache


def backward(params, cache, dlogits):
    """Gradients of the loss for every named parameter, as float64 arrays."""
    arch = params.arch
    if not isinstance(cache, ForwardCache) or cache.arch != arch or \
            cache.shapes != {k: v.shape for k, v in params.tensors.items()}:
        raise ShapeError("backward", "cache does not come from a forward pass of these params")
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != (cache.batch, arch.classes):
        raise ShapeError("backward", f"dlogits shape {dlogits.shape} does not match "
                                     f"cached batch ({cache.batch}, {arch.classes})")
    t = {k: np.asarray(v, dtype=np.float64) for k, v in params.tensors.items()}
    n = cache.batch
    grads = {}

    grads["fc2.w"] = cache.hidden.T @ dlogits
    grads["fc2.b"] = dlogits.sum(axis=0)
    dh = (dlogits @ t["fc2.w"].T) * (cache.hidden_pre > 0)
    grads["fc1.w"] = cache.features.T @ dh
    grads["fc1.b"] = dh.sum(axis=0)
    dfeat = dh @ t["fc1.w"].T

    # slice the concat gradient back into one block per tap
    tap_grad = {}
    start = 0
    for i in arch.tap_stages:
        width = arch.stage_channels[i]
        tap_grad[i] = dfeat[:, start:start + width]
        start += width

    dact = None  # gradient w.r.t. this stage's activation rows, from the stage above
    for i in reversed(range(arch.n_stages)):
        st = cache.stages[i]
        ho, wo = st.out_hw
        cout = arch.stage_channels[i]
        if dact is None:
            dact = np.zeros((n * ho * wo, cout))
        if i in tap_grad:
            # mean-pool adjoint: spread evenly over the spatial positions
            spread = np.repeat(tap_grad[i] / (ho * wo), ho * wo, axis=0)
            dact = dact + spread
        dpre = dact * (st.pre > 0)
        w = t[f"stage{i}.w"]
        grads[f"stage{i}.w"] = (dpre.T @ st.cols).reshape(w.shape)
        grads[f"stage{i}.b"] = dpre.sum(axis=0)
        if i == 0:
            break
        dcols = dpre @ w.reshape(cout, -1)
        dx = kernels.col2im(dcols, st.in_shape, KSIZE, STRIDE, PAD)
        dact = dx.transpose(0, 2, 3, 1).reshape(-1, dx.shape[1])

    return {name: grads[name] for name in params.tensors}


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if n < 1 or labels.shape != (n,):
        raise ShapeError("loss", f"{n} logits rows vs labels of shape {labels.shape}")
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(n), labels]
    loss = float(np.mean(lse - picked))
    dlogits = softmax(logits)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def predict_batch(params, images, batch_size=64):
    """Class-1 probability for each already-preprocessed Image."""
    s = params.arch.input_size
    out = np.empty(len(images), dtype=np.float64)
    for start in range(0, len(images), batch_size):
        chunk = images[start:start + batch_size]
        for im in chunk:
            if (im.width, im.height) != (s, s):
                raise ShapeError("input", f"image is {im.width}x{im.height}, "
                                          f"model expects {s}x{s}")
        logits, _ = forward(params, to_network_input(chunk))
        out[start:start + len(chunk)] = softmax(logits)[:, 1]
    return out


def predict(params, img):
    return float(predict_batch(params, [img])[0])
