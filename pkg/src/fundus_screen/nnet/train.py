"""Mini-batch training with per-epoch validation and early stopping."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import kvconfig, metrics
from ..augment import AugmentPolicy, apply_transform, rng_for, sample_transform
from ..errors import ConfigError, UndefinedMetricError
from ..imaging import to_network_input
from .model import backward, cross_entropy, forward, softmax
from .optim import AdamState, adam_step, lr_at
from .params import init_params

log = logging.getLogger(__name__)

# image index reserved for the per-epoch shuffle stream
SHUFFLE_STREAM = (1 << 64) - 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr0: float = 1e-4
    gamma: float = 0.95
    batch_size: int = 16
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        # epochs == 0 is representable so fine_tune can express "keep the base weights";
        # train() itself requires at least one epoch
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr0 > 0:
            raise ConfigError(f"lr0 must be > 0, got {self.lr0}")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def to_text(self):
        return kvconfig.dump(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class Dataset:
    """Preprocessed images with binary labels and stable ids."""

    images: list
    labels: np.ndarray
    ids: list = None

    def __post_init__(self):
        self.images = list(self.images)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.ids is None:
            self.ids = [str(i) for i in range(len(self.images))]
        if not len(self.images) == len(self.labels) == len(self.ids):
            raise ConfigError("images, labels and ids must have equal length")
        if len(self.labels) and not np.isin(self.labels, (0, 1)).all():
            raise ConfigError("labels must be 0 or 1")

    def __len__(self):
        return len(self.images)

    def subset(self, indices):
        indices = list(indices)
        return Dataset([self.images[i] for i in indices], self.labels[indices],
                       [self.ids[i] for i in indices])


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    val_auroc: float | None


@dataclass
class History:
    records: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    stopped_early: bool = False
    init_digest: str | None = None

    @property
    def epochs_run(self):
        return len(self.records)

    def to_dict(self):
        return {
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss if self.records else None,
            "stopped_early": self.stopped_early,
            "init_digest": self.init_digest,
            "epochs": [dataclasses.asdict(r) for r in self.records],
        }


def evaluate_loss(params, data, batch_size=64):
    """Mean cross-entropy and class-1 probabilities over ``data`` (no augmentation)."""
    total = 0.0
    probs = np.empty(len(data))
    for start in range(0, len(data), batch_size):
        idx = range(start, min(start + batch_size, len(data)))
        logits, _ = forward(params, to_network_input([data.images[i] for i in idx]))
        loss, _ = cross_entropy(logits, data.labels[start:start + len(idx)])
        total += loss * len(idx)
        probs[start:start + len(idx)] = softmax(logits)[:, 1]
    return total / len(data), probs


def _safe_auroc(scores, labels):
    try:
        return metrics.auroc(scores, labels)
    except UndefinedMetricError:
        return None


def augment_batch(data, indices, policy, seed, epoch):
    return [apply_transform(data.images[i], sample_transform(rng_for(seed, i, epoch), policy))
            for i in indices]


def train(train_data, val_data, arch, cfg, init=None, policy=None, preprocess=None):
    """Train and return ``(best_params, history)``.

    ``init`` starts from existing weights (fine-tuning); otherwise weights are
    He-initialized from ``cfg.seed``. The returned parameters are those of
    the epoch with the lowest validation loss.
    """
    if cfg.epochs < 1:
        raise ConfigError(f"train needs epochs >= 1, got {cfg.epochs}")
    if len(train_data) == 0 or len(val_data) == 0:
        raise ConfigError("training and validation sets must be non-empty")
    if len(np.unique(train_data.labels)) < 2:
        raise ConfigError("training set contains a single class")
    policy = AugmentPolicy() if policy is None else policy

    history = History()
    if init is not None:
        if init.arch != arch:
            raise ConfigError(f"init model arch {init.arch} does not match requested {arch}")
        params = init.copy()
        history.init_digest = init.digest()
        if preprocess is not None:
            params.preprocess = preprocess
    else:
        params = init_params(arch, cfg.seed, preprocess)
    state = AdamState.zeros(params)
    best = params.copy()
    since_best = 0
    n = len(train_data)

    for epoch in range(cfg.epochs):
        lr = lr_at(cfg.lr0, cfg.gamma, epoch)
        order = rng_for(cfg.seed, SHUFFLE_STREAM, epoch).permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x = to_network_input(augment_batch(train_data, idx, policy, cfg.seed, epoch))
            logits, cache = forward(params, x)
            loss, dlogits = cross_entropy(logits, train_data.labels[idx])
            grads = backward(params, cache, dlogits)
            params, state = adam_step(params, grads, state, lr)
            loss_sum += loss * len(idx)

        val_loss, val_probs = evaluate_loss(params, val_data)
        rec = EpochRecord(epoch + 1, lr, loss_sum / n, val_loss,
                          _safe_auroc(val_probs, val_data.labels))
        history.records.append(rec)
        log.info("epoch %d lr %.3g train %.4f val %.4f auroc %s", rec.epoch, lr,
                 rec.train_loss, val_loss, rec.val_auroc)

        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch + 1
            best = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                history.stopped_early = True
                break
    return best, history
