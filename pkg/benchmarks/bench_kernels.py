"""Time every hot kernel on the numpy and numba backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 448]

Each case is checked for bit-identical output before timing. The first numba
call of each kernel is a warm-up so JIT compilation stays out of the numbers.
"""
import argparse
import timeit

import numpy as np

from fundus_screen import kernels
from fundus_screen.augment import rotation_matrix
from fundus_screen.imaging import gaussian_kernel


def cases(size, rng):
    plane = rng.uniform(0, 255, (size, size))
    k = gaussian_kernel(10.0)
    img = rng.uniform(0, 255, (size, size, 3))
    big = rng.uniform(0, 255, (800, 800, 3))
    rot = rotation_matrix(size, size, 17.0)
    act = rng.normal(size=(16, 16, 32, 32))
    cols = kernels.im2col(act, 3, 2, 1)
    return {
        f"blur rows {size}x{size} s=10": lambda m: m.blur_axis(plane, k, 1),
        f"blur cols {size}x{size} s=10": lambda m: m.blur_axis(plane, k, 0),
        f"warp {size}x{size}x3": lambda m: m.warp_bilinear(img, rot),
        "resize 800->448": lambda m: m.resize_bilinear(big, 448, 448),
        "im2col 16x16x32x32": lambda m: m.im2col(act, 3, 2, 1),
        "col2im 16x16x32x32": lambda m: m.col2im(cols, act.shape, 3, 2, 1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=448)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    npk, nbk = kernels.implementation("numpy"), kernels.implementation("numba")
    print(f"{'kernel':<28}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}  identical")
    for name, fn in cases(args.size, np.random.default_rng(0)).items():
        same = np.array_equal(fn(npk), fn(nbk))
        t_np = min(timeit.repeat(lambda: fn(npk), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fn(nbk), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<28}{t_np:>10.2f}{t_nb:>10.2f}{t_np / t_nb:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
