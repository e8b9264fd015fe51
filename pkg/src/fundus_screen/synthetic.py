"""Synthetic stand-in datasets for desk-scale end-to-end runs.

``blob``: class 1 carries a bright Gaussian blob at a random interior
position, class 0 is background only. ``ring``: class 1 carries a bright
annulus instead. Both add per-pixel Gaussian noise over a dim reddish
background.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .imaging import Image, to_bytes, write_image
from .nnet.train import Dataset

BACKGROUND = np.array([70.0, 40.0, 25.0])
SHAPE_GAIN = np.array([1.0, 0.9, 0.7])


def _canvas(rng, size, noise):
    bg = BACKGROUND + rng.normal(0.0, 5.0, 3)
    return np.broadcast_to(bg, (size, size, 3)) + rng.normal(0.0, noise, (size, size, 3))


def _center(rng, size, margin):
    return rng.uniform(margin, size - 1 - margin, 2)


def draw_blob(rng, size, amplitude, margin):
    cy, cx = _center(rng, size, margin)
    sigma = rng.uniform(3.0, 6.0)
    yy, xx = np.mgrid[0:size, 0:size]
    d2 = (yy - cy) ** 2 + (xx - cx) ** 2
    return amplitude * np.exp(-d2 / (2 * sigma * sigma))


def draw_ring(rng, size, amplitude, margin):
    cy, cx = _center(rng, size, margin)
    radius = rng.uniform(5.0, 9.0)
    yy, xx = np.mgrid[0:size, 0:size]
    d = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
    return amplitude * np.exp(-((d - radius) ** 2) / (2 * 1.5 ** 2))


SHAPES = {"blob": draw_blob, "ring": draw_ring}


def make_dataset(n, seed, kind="blob", size=64, noise=12.0, amplitude=120.0, prefix=""):
    """Balanced dataset of ``n`` images; labels alternate before a seeded shuffle."""
    draw = SHAPES[kind]
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % 2)
    margin = size // 4
    images = []
    for y in labels:
        px = _canvas(rng, size, noise)
        if y == 1:
            px = px + draw(rng, size, amplitude, margin)[..., None] * SHAPE_GAIN
        images.append(Image(to_bytes(px)))
    ids = [f"{prefix}{kind}_{i:04d}" for i in range(n)]
    return Dataset(images, labels, ids)


def blob_splits(seed=0, n_train=200, n_val=50, n_test=50, kind="blob"):
    """Independent train/val/test sets drawn from disjoint seed streams."""
    return (make_dataset(n_train, [seed, 0], kind, prefix="train_"),
            make_dataset(n_val, [seed, 1], kind, prefix="val_"),
            make_dataset(n_test, [seed, 2], kind, prefix="test_"))


def write_dataset(data, out_dir, manifest_name="manifest.csv"):
    """Write images as PPM plus a ``path,label`` manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["path,label"]
    for img, y, ident in zip(data.images, data.labels, data.ids):
        name = f"{ident}.ppm"
        write_image(out / name, img)
        lines.append(f"{name},{int(y)}")
    path = out / manifest_name
    path.write_text("\n".join(lines) + "\n")
    return path
