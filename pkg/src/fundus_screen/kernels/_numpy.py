"""Pure-numpy kernels.

Each function here has a loop-level twin in ``_numba.py``. The twins perform
the same floating-point operations in the same order, so both backends give
bit-identical results.
"""
import numpy as np


def reflect101_index(idx, n):
    """Map arbitrary integer positions into ``[0, n)`` by reflect-101 mirroring."""
    idx = np.asarray(idx, dtype=np.int64)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def blur_axis(x, kernel, axis):
    """Correlate a 2-D float64 array with a symmetric 1-D kernel along ``axis``."""
    x = np.asarray(x, dtype=np.float64)
    r = (kernel.shape[0] - 1) // 2
    n = x.shape[axis]
    src = reflect101_index(np.arange(-r, n + r), n)
    padded = np.take(x, src, axis=axis)
    out = np.zeros(x.shape, dtype=np.float64)
    for j in range(kernel.shape[0]):
        if axis == 0:
            out += kernel[j] * padded[j:j + n, :]
        else:
            out += kernel[j] * padded[:, j:j + n]
    return out


def _bilinear_mix(p00, p01, p10, p11, wx, wy):
    return (1.0 - wy) * ((1.0 - wx) * p00 + wx * p01) + wy * ((1.0 - wx) * p10 + wx * p11)


def warp_bilinear(img, matrix):
    """Inverse-map warp of an (H, W, C) float64 image with zero fill.

    ``matrix`` is 2x3 and maps output pixel coordinates ``(x, y, 1)`` to
    source coordinates. Samples outside the source contribute zero.
    """
    h, w, c = img.shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    sx = matrix[0, 0] * xs + matrix[0, 1] * ys + matrix[0, 2]
    sy = matrix[1, 0] * xs + matrix[1, 1] * ys + matrix[1, 2]
    x0f = np.floor(sx)
    y0f = np.floor(sy)
    wx = (sx - x0f)[..., None]
    wy = (sy - y0f)[..., None]
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)

    def tap(yy, xx):
        ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        return np.where(ok[..., None], vals, 0.0)

    return _bilinear_mix(tap(y0, x0), tap(y0, x0 + 1), tap(y0 + 1, x0), tap(y0 + 1, x0 + 1),
                         wx, wy)


def _resize_coords(n_out, n_in):
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(img, out_h, out_w):
    """Half-pixel-center bilinear resize of an (H, W, C) float64 image."""
    h, w, _ = img.shape
    y0, y1, wy = _resize_coords(out_h, h)
    x0, x1, wx = _resize_coords(out_w, w)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    return _bilinear_mix(img[y0][:, x0], img[y0][:, x1], img[y1][:, x0], img[y1][:, x1], wx, wy)


def im2col(x, ksize, stride, pad):
    """Unfold (N, C, H, W) into rows of receptive fields, shape (N*Ho*Wo, C*k*k)."""
    n, c, h, w = x.shape
    ho = (h + 2 * pad - ksize) // stride + 1
    wo = (w + 2 * pad - ksize) // stride + 1
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    xp[:, :, pad:pad + h, pad:pad + w] = x
    cols = np.empty((n, ho, wo, c, ksize, ksize), dtype=x.dtype)
    for ki in range(ksize):
        for kj in range(ksize):
            patch = xp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride]
            cols[:, :, :, :, ki, kj] = patch.transpose(0, 2, 3, 1)
    return cols.reshape(n * ho * wo, c * ksize * ksize)


def col2im(cols, shape, ksize, stride, pad):
    """Adjoint of :func:`im2col`: scatter-add receptive-field rows back to (N, C, H, W)."""
    n, c, h, w = shape
    ho = (h + 2 * pad - ksize) // stride + 1
    wo = (w + 2 * pad - ksize) // stride + 1
    cols = cols.reshape(n, ho, wo, c, ksize, ksize)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ki in range(ksize):
        for kj in range(ksize):
            xp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride] += \
                cols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(xp[:, :, pad:pad + h, pad:pad + w])
