"""Slow, independent reference implementations used as test oracles.

Nothing here imports from the package under test.
"""
import math

import numpy as np


def reflect101(i, n):
    if n == 1:
        return 0
    while i < 0 or i >= n:
        if i < 0:
            i = -i
        if i >= n:
            i = 2 * (n - 1) - i
    return i


def gauss_taps(sigma):
    r = math.ceil(3 * sigma)
    w = [math.exp(-(i * i) / (2 * sigma * sigma)) for i in range(-r, r + 1)]
    s = sum(w)
    return [v / s for v in w], r


def direct_blur(plane, sigma):
    """Non-separable 2-D Gaussian correlation with reflect-101 borders, float64."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    taps, r = gauss_taps(sigma)
    # build the 2-D weights explicitly
    k2 = np.outer(taps, taps)
    out = np.zeros((h, w))
    for y in range(h):
        rows = [reflect101(y + i, h) for i in range(-r, r + 1)]
        for x in range(w):
            cols = [reflect101(x + j, w) for j in range(-r, r + 1)]
            out[y, x] = float(np.sum(k2 * plane[np.ix_(rows, cols)]))
    return out


def round_half_away(v):
    return math.floor(v + 0.5) if v >= 0 else -math.floor(-v + 0.5)


def scalar_normalize(pixels, sigma, amp, offset):
    """Pixel-by-pixel local mean subtraction on an (H, W, 3) uint8 array."""
    h, w, _ = pixels.shape
    out = np.zeros((h, w, 3), dtype=np.uint8)
    for c in range(3):
        blur = direct_blur(pixels[:, :, c], sigma)
        for y in range(h):
            for x in range(w):
                v = amp * (float(pixels[y, x, c]) - blur[y, x]) + offset
                out[y, x, c] = min(255, max(0, round_half_away(v)))
    return out


def pairwise_auroc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def enumerated_auprc(scores, labels):
    """Average precision by brute force: every distinct threshold, highest first."""
    n_pos = sum(1 for y in labels if y == 1)
    total = 0.0
    prev_tp = 0
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
        if tp != prev_tp:
            total += ((tp - prev_tp) / n_pos) * (tp / (tp + fp))
        prev_tp = tp
    return total


def enumerated_roc(scores, labels):
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    pts = [(0.0, 0.0)]
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
        pts.append((fp / n_neg, tp / n_pos))
    return pts


def scalar_adam(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam trajectory for a sequence of gradients."""
    m = v = 0.0
    out = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        out.append(theta)
    return out


def fd_cross_entropy_grad(logits, labels, h=1e-6):
    """Central differences of mean softmax cross-entropy, float64."""
    logits = np.asarray(logits, dtype=np.float64)

    def loss(z):
        total = 0.0
        for row, y in zip(z, labels):
            m = max(row)
            lse = m + math.log(sum(math.exp(v - m) for v in row))
            total += lse - row[y]
        return total / len(z)

    g = np.zeros_like(logits)
    for idx in np.ndindex(logits.shape):
        up = logits.copy()
        dn = logits.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (loss(up) - loss(dn)) / (2 * h)
    return g
