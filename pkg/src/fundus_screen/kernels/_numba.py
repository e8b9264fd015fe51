"""Numba twins of the kernels in ``_numpy.py``.

Loop bodies keep the same arithmetic order as the numpy versions; do not
enable fastmath here or the backends stop agreeing bit for bit.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _reflect101(i, n):
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i = i % period
    if i < 0:
        i += period
    if i >= n:
        i = period - i
    return i


@njit(cache=True)
def _blur_rows(x, kernel):
    # correlate along axis 1
    h, w = x.shape
    r = (kernel.shape[0] - 1) // 2
    out = np.empty((h, w), dtype=np.float64)
    idx = np.empty(w + 2 * r, dtype=np.int64)
    for p in range(w + 2 * r):
        idx[p] = _reflect101(p - r, w)
    for y in range(h):
        for xx in range(w):
            acc = 0.0
            for j in range(kernel.shape[0]):
                acc += kernel[j] * x[y, idx[xx + j]]
            out[y, xx] = acc
    return out


@njit(cache=True)
def _blur_cols(x, kernel):
    h, w = x.shape
    r = (kernel.shape[0] - 1) // 2
    out = np.empty((h, w), dtype=np.float64)
    idx = np.empty(h + 2 * r, dtype=np.int64)
    for p in range(h + 2 * r):
        idx[p] = _reflect101(p - r, h)
    for y in range(h):
        for xx in range(w):
            acc = 0.0
            for j in range(kernel.shape[0]):
                acc += kernel[j] * x[idx[y + j], xx]
            out[y, xx] = acc
    return out


def blur_axis(x, kernel, axis):
    x = np.ascontiguousarray(x, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    if axis == 0:
        return _blur_cols(x, kernel)
    return _blur_rows(x, kernel)


@njit(cache=True)
def _tap(img, yy, xx, ch):
    h, w, _ = img.shape
    if yy < 0 or yy >= h or xx < 0 or xx >= w:
        return 0.0
    return img[yy, xx, ch]


@njit(cache=True)
def _warp(img, m):
    h, w, c = img.shape
    out = np.empty((h, w, c), dtype=np.float64)
    for y in range(h):
        fy = float(y)
        for x in range(w):
            fx = float(x)
            sx = m[0, 0] * fx + m[0, 1] * fy + m[0, 2]
            sy = m[1, 0] * fx + m[1, 1] * fy + m[1, 2]
            x0f = np.floor(sx)
            y0f = np.floor(sy)
            wx = sx - x0f
            wy = sy - y0f
            x0 = int(x0f)
            y0 = int(y0f)
            for ch in range(c):
                p00 = _tap(img, y0, x0, ch)
                p01 = _tap(img, y0, x0 + 1, ch)
                p10 = _tap(img, y0 + 1, x0, ch)
                p11 = _tap(img, y0 + 1, x0 + 1, ch)
                out[y, x, ch] = (1.0 - wy) * ((1.0 - wx) * p00 + wx * p01) + \
                    wy * ((1.0 - wx) * p10 + wx * p11)
    return out


def warp_bilinear(img, matrix):
    return _warp(np.ascontiguousarray(img, dtype=np.float64),
                 np.ascontiguousarray(matrix, dtype=np.float64))


@njit(cache=True)
def _resize(img, out_h, out_w):
    h, w, c = img.shape
    out = np.empty((out_h, out_w, c), dtype=np.float64)
    sy_scale = h / out_h
    sx_scale = w / out_w
    for y in range(out_h):
        sy = (y + 0.5) * sy_scale - 0.5
        sy = min(max(sy, 0.0), h - 1.0)
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, h - 1)
        wy = sy - y0
        for x in range(out_w):
            sx = (x + 0.5) * sx_scale - 0.5
            sx = min(max(sx, 0.0), w - 1.0)
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, w - 1)
            wx = sx - x0
            for ch in range(c):
                out[y, x, ch] = (
                    (1.0 - wy) * ((1.0 - wx) * img[y0, x0, ch] + wx * img[y0, x1, ch])
                    + wy * ((1.0 - wx) * img[y1, x0, ch] + wx * img[y1, x1, ch]))
    return out


def resize_bilinear(img, out_h, out_w):
    return _resize(np.ascontiguousarray(img, dtype=np.float64), out_h, out_w)


@njit(cache=True)
def _im2col(x, ksize, stride, pad):
    n, c, h, w = x.shape
    ho = (h + 2 * pad - ksize) // stride + 1
    wo = (w + 2 * pad - ksize) // stride + 1
    cols = np.zeros((n * ho * wo, c * ksize * ksize), dtype=x.dtype)
    for b in range(n):
        for oy in range(ho):
            for ox in range(wo):
                row = (b * ho + oy) * wo + ox
                for ch in range(c):
                    for ki in range(ksize):
                        iy = oy * stride + ki - pad
                        if iy < 0 or iy >= h:
                            continue
                        for kj in range(ksize):
                            ix = ox * stride + kj - pad
                            if ix < 0 or ix >= w:
                                continue
                            cols[row, (ch * ksize + ki) * ksize + kj] = x[b, ch, iy, ix]
    return cols


def im2col(x, ksize, stride, pad):
    return _im2col(np.ascontiguousarray(x), ksize, stride, pad)


@njit(cache=True)
def _col2im(cols, n, c, h, w, ksize, stride, pad):
    ho = (h + 2 * pad - ksize) // stride + 1
    wo = (w + 2 * pad - ksize) // stride + 1
    out = np.zeros((n, c, h, w), dtype=cols.dtype)
    # (ki, kj) outermost: same per-element accumulation order as the numpy path
    for ki in range(ksize):
        for kj in range(ksize):
            for b in range(n):
                for ch in range(c):
                    for oy in range(ho):
                        iy = oy * stride + ki - pad
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(wo):
                            ix = ox * stride + kj - pad
                            if ix < 0 or ix >= w:
                                continue
                            row = (b * ho + oy) * wo + ox
                            out[b, ch, iy, ix] += cols[row, (ch * ksize + ki) * ksize + kj]
    return out


def col2im(cols, shape, ksize, stride, pad):
    n, c, h, w = shape
    return _col2im(np.ascontiguousarray(cols), n, c, h, w, ksize, stride, pad)
