"""Fundus image screening pipeline: preprocessing, augmentation, MiniNet, CV ensembles, metrics."""

__version__ = "0.1.0"
