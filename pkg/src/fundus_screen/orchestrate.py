"""Experiment logic: manifests, stratified folds, CV runs, top-k ensembles, fine-tuning."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .augment import IDENTITY, apply_transform, rng_for, tta_set
from .errors import ConfigError, FundusScreenError, ManifestError, ShapeError
from .imaging import preprocess as run_preprocess
from .imaging import read_image
from .nnet import Dataset, History, evaluate_loss, predict_batch, save_model, train
from .parallel import map_ordered

BINARY_HEADERS = ("label", "grade")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    id: str


@dataclass
class Manifest:
    entries: list
    source: str = ""
    base_dir: Path = field(default_factory=Path)

    def __len__(self):
        return len(self.entries)

    @property
    def ids(self):
        return [e.id for e in self.entries]

    @property
    def labels(self):
        return np.array([e.label for e in self.entries], dtype=np.int64)

    def resolve(self, entry):
        p = Path(entry.path)
        return p if p.is_absolute() else self.base_dir / p


def binarize_grade(grade, threshold=3):
    """Referable iff the 0-4 DR grade is at least ``threshold`` (severe NPDR or PDR)."""
    if isinstance(grade, bool) or int(grade) != grade or not 0 <= grade <= 4:
        raise ConfigError(f"DR grade must be an integer in 0..4, got {grade!r}")
    return int(grade >= threshold)


def load_manifest(path, binarize=False, grade_threshold=3):
    """Read a ``path,label`` or ``path,grade`` CSV.

    Line numbers in errors count the header as line 1. Repeated paths are
    kept, with ids suffixed by their row index.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ManifestError("empty manifest", line=1)
    header = [h.strip().lower() for h in rows[0]]
    if len(header) != 2 or header[0] != "path" or header[1] not in BINARY_HEADERS:
        raise ManifestError(f"header must be 'path,label' or 'path,grade', got {rows[0]}", line=1)

    entries, seen = [], {}
    for row_index, row in enumerate(rows[1:]):
        line = row_index + 2
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ManifestError(f"expected 2 columns, got {len(row)}", line=line)
        rel, raw = row[0].strip(), row[1].strip()
        if not rel:
            raise ManifestError("empty path", line=line)
        try:
            value = int(raw)
        except ValueError:
            raise ManifestError(f"label {raw!r} is not an integer", line=line) from None
        if binarize:
            try:
                label = binarize_grade(value, grade_threshold)
            except ConfigError as exc:
                raise ManifestError(str(exc), line=line) from None
        elif value in (0, 1):
            label = value
        else:
            raise ManifestError(f"non-binary label {raw!r} (use --binarize for DR grades)",
                                line=line)
        ident = rel
        if rel in seen:
            ident = f"{rel}#{row_index}"
            warnings.warn(f"{path}:{line}: duplicate path {rel!r} (first at line {seen[rel]}); "
                          f"using id {ident!r}", stacklevel=2)
        else:
            seen[rel] = line
        entries.append(ManifestEntry(rel, label, ident))
    return Manifest(entries, source=header[1], base_dir=path.parent)


def load_dataset(manifest, preprocess=None, input_size=None):
    """Read every manifest image, optionally preprocess, and check the network size."""
    def load(entry):
        p = manifest.resolve(entry)
        try:
            img = read_image(p)
        except OSError as exc:
            raise ManifestError(f"cannot read {p}: {exc}") from exc
        if preprocess is not None:
            img = run_preprocess(img, preprocess)
        if input_size is not None and (img.width, img.height) != (input_size, input_size):
            raise ShapeError("input", f"{p} is {img.width}x{img.height}, "
                                      f"model expects {input_size}x{input_size}")
        return img

    images = map_ordered(load, manifest.entries)
    return Dataset(images, manifest.labels, manifest.ids)


# ---------------------------------------------------------------- folds

@dataclass
class FoldPlan:
    k: int
    seed: int
    assignments: dict

    def fold_of(self, ident):
        return self.assignments[ident]

    def members(self, fold):
        return [i for i, f in self.assignments.items() if f == fold]

    def split(self, ids, fold):
        """Positions in ``ids`` for (train, validation) of ``fold``."""
        val = [n for n, i in enumerate(ids) if self.assignments[i] == fold]
        trn = [n for n, i in enumerate(ids) if self.assignments[i] != fold]
        return trn, val


def stratified_kfold(items, k, seed):
    """Per-class seeded shuffle, then a round-robin deal into ``k`` folds.

    The deal continues across classes (class 1 starts where class 0 ended)
    so total fold sizes also differ by at most one.
    """
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    ids = list(items.ids)
    labels = np.asarray(items.labels)
    if len(set(ids)) != len(ids):
        raise ConfigError("ids must be unique")
    assignments = {}
    cursor = 0
    for cls in (0, 1):
        members = [i for i, y in zip(ids, labels) if y == cls]
        if len(members) < k:
            raise ConfigError(f"class {cls} has {len(members)} samples, fewer than k={k}")
        order = rng_for(seed, cls, 0).permutation(len(members))
        for pos, j in enumerate(order):
            assignments[members[j]] = (cursor + pos) % k
        cursor = (cursor + len(members)) % k
    # manifest order, so the JSON form is stable
    return FoldPlan(k, seed, {i: assignments[i] for i in ids})


# ---------------------------------------------------------------- CV

class FoldError(FundusScreenError):
    def __init__(self, fold, exc):
        super().__init__(f"fold {fold}: {exc}")
        self.fold = fold


@dataclass
class FoldResult:
    fold: int
    model: str
    val_auroc: float
    val_auprc: float
    epochs_run: int


@dataclass
class CvResult:
    k: int
    seed: int
    folds: list
    selected: list = field(default_factory=list)

    def to_dict(self):
        return {"k": self.k, "seed": self.seed, "folds": [asdict(f) for f in self.folds],
                "selected": list(self.selected)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(d["k"], d["seed"], [FoldResult(**f) for f in d["folds"]], d["selected"])


CV_SCHEMA = {
    "type": "object",
    "required": ["k", "seed", "folds", "selected"],
    "additionalProperties": False,
    "properties": {
        "k": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "folds": {"type": "array", "items": {
            "type": "object",
            "required": ["fold", "model", "val_auroc", "val_auprc", "epochs_run"],
            "additionalProperties": False,
            "properties": {
                "fold": {"type": "integer", "minimum": 0},
                "model": {"type": "string", "minLength": 1},
                "val_auroc": {"type": "number", "minimum": 0, "maximum": 1},
                "val_auprc": {"type": "number", "minimum": 0, "maximum": 1},
                "epochs_run": {"type": "integer", "minimum": 1},
            }}},
        "selected": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
}


def select_top_k(cv, top_k):
    """Folds by validation AUROC, best first; ties go to the lower fold index."""
    if not 1 <= top_k <= len(cv.folds):
        raise ConfigError(f"top_k must lie in 1..{len(cv.folds)}, got {top_k}")
    ranked = sorted(cv.folds, key=lambda f: (-f.val_auroc, f.fold))
    return ranked[:top_k]


def run_cv(data, arch, cfg, k, out_dir, seed=None, top_k=None, policy=None, preprocess=None):
    """Train one model per fold (fold ``i`` validates, seeded ``cfg.seed + i``).

    Writes ``fold<i>.mlnn`` files and ``cv_result.json`` into ``out_dir``.
    The fold plan uses ``seed`` (default ``cfg.seed``).
    """
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = stratified_kfold(data, k, seed)
    folds = []
    for i in range(k):
        trn, val = plan.split(data.ids, i)
        try:
            best, hist = train(data.subset(trn), data.subset(val), arch,
                               cfg.replace(seed=cfg.seed + i), policy=policy,
                               preprocess=preprocess)
            model_name = f"fold{i}.mlnn"
            save_model(best, out / model_name)
            _, probs = evaluate_loss(best, data.subset(val))
            vl = data.labels[val]
            folds.append(FoldResult(i, model_name, metrics.auroc(probs, vl),
                                    metrics.auprc(probs, vl), hist.epochs_run))
        except FundusScreenError as exc:
            raise FoldError(i, exc) from exc
    result = CvResult(k, seed, folds)
    if top_k is not None:
        result.selected = [f.fold for f in select_top_k(result, top_k)]
    (out / "cv_result.json").write_text(result.to_json())
    return result


# ---------------------------------------------------------------- inference

def _check_sizes(models):
    if not models:
        raise ConfigError("ensemble needs at least one model")
    sizes = {m.arch.input_size for m in models}
    if len(sizes) != 1:
        raise ConfigError(f"ensemble members disagree on input_size: {sorted(sizes)}")


def ensemble_predict_batch(models, images, policy=None):
    """Flat mean over every (model, TTA view) pair for each image."""
    _check_sizes(models)
    views = tta_set(policy) if policy is not None else [IDENTITY]
    columns = []
    for view in views:
        batch = images if view == IDENTITY else [apply_transform(im, view) for im in images]
        for m in models:
            columns.append(predict_batch(m, batch))
    table = np.stack(columns, axis=1)
    # fsum: exact, hence independent of model/view order
    return np.array([math.fsum(row) / len(row) for row in table])


def ensemble_predict(models, img, policy=None):
    return float(ensemble_predict_batch(models, [img], policy)[0])


def prepare_input(model, img, raw=False):
    """Apply the model's embedded preprocessing (unless ``raw``) and check the size."""
    if not raw and model.preprocess is not None:
        img = run_preprocess(img, model.preprocess)
    s = model.arch.input_size
    if (img.width, img.height) != (s, s):
        raise ShapeError("input", f"image is {img.width}x{img.height}, model expects {s}x{s}")
    return img


def ensemble_predict_raw(models, images, policy=None, raw=False):
    """Like :func:`ensemble_predict_batch`, but each member prepares its own inputs.

    Members may embed different preprocessing (e.g. different crop sizes);
    the result is still the flat mean over every (model, view) pair.
    """
    _check_sizes(models)
    views = tta_set(policy) if policy is not None else [IDENTITY]
    prepared = {}
    columns = []
    for m in models:
        key = m.preprocess if not raw else None
        if key not in prepared:
            prepared[key] = map_ordered(lambda im: prepare_input(m, im, raw), images)
        base = prepared[key]
        for view in views:
            batch = base if view == IDENTITY else [apply_transform(im, view) for im in base]
            columns.append(predict_batch(m, batch))
    table = np.stack(columns, axis=1)
    return np.array([math.fsum(row) / len(row) for row in table])


def fine_tune(base, train_data, val_data, cfg, arch=None, policy=None):
    """Continue training from ``base``; history records the base model digest."""
    if arch is not None and arch != base.arch:
        raise ConfigError(f"base model arch {base.arch} does not match requested {arch}")
    if cfg.epochs == 0:
        return base.copy(), History(init_digest=base.digest())
    return train(train_data, val_data, base.arch, cfg, init=base, policy=policy)
