"""``fundus-screen`` command line: preprocess, train, cv, eval, predict, synth."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import metrics, synthetic
from .augment import TTA_VIEWS
from .config import load_run_config
from .errors import FundusScreenError, UndefinedMetricError
from .imaging import PreprocessConfig, preprocess, read_image, write_image
from .nnet import load_model, save_model, train
from .orchestrate import (ensemble_predict_raw, fine_tune, load_dataset, load_manifest,
                          run_cv)
from .parallel import map_ordered

log = logging.getLogger("fundus_screen")

IMAGE_SUFFIXES = {".ppm", ".pnm", ".png"}
SIDECAR = "preprocess.cfg"


def positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def fold_count(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 folds, got {v}")
    return v


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


# ---------------------------------------------------------------- preprocess

def cmd_preprocess(args):
    cfg = load_run_config(args.config, {
        "crop_size": args.crop, "resize_to": args.resize, "sigma": args.sigma,
        "amplification": args.amp, "offset": args.offset,
    }).preprocess or PreprocessConfig()
    src, dst = Path(args.input_dir), Path(args.output_dir)
    if not src.is_dir():
        raise FundusScreenError(f"input directory not found: {src}")
    dst.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in src.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)

    def work(path):
        try:
            write_image(dst / path.name, preprocess(read_image(path), cfg))
            return None
        except (FundusScreenError, OSError, ValueError) as exc:
            return f"{path.name}: {exc}"

    failures = [f for f in map_ordered(work, files) if f is not None]
    for msg in failures:
        log.error("failed %s", msg)
    (dst / SIDECAR).write_text(cfg.to_text())
    print(f"processed {len(files) - len(failures)}, failed {len(failures)}")
    return 0 if not failures else 1


# ---------------------------------------------------------------- train

def _train_overrides(args):
    return {
        "variant": getattr(args, "arch", None), "epochs": args.epochs, "lr0": args.lr,
        "gamma": args.gamma, "patience": args.patience, "seed": args.seed,
        "batch_size": args.batch_size, "input_size": args.input_size,
    }


def _dataset(path, rc, args):
    manifest = load_manifest(path, binarize=args.binarize)
    pre = rc.preprocess if args.apply_preprocess else None
    if args.apply_preprocess and pre is None:
        raise FundusScreenError("--apply-preprocess needs preprocess keys in --config")
    return load_dataset(manifest, preprocess=pre, input_size=rc.arch.input_size)


def cmd_train(args):
    rc = load_run_config(args.config, _train_overrides(args))
    train_data = _dataset(args.manifest, rc, args)
    val_data = _dataset(args.val_manifest, rc, args)
    if args.init:
        base = load_model(args.init)
        if rc.preprocess is not None:
            base.preprocess = rc.preprocess
        best, hist = fine_tune(base, train_data, val_data, rc.train, arch=rc.arch,
                               policy=rc.augment)
    else:
        best, hist = train(train_data, val_data, rc.arch, rc.train, policy=rc.augment,
                           preprocess=rc.preprocess)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(best, out)
    doc = hist.to_dict()
    doc["init_model"] = str(args.init) if args.init else None
    doc["config"] = {"train": dataclasses.asdict(rc.train), "arch": rc.arch.to_text().splitlines(),
                     "augment": rc.augment.to_text().splitlines(),
                     "preprocess": rc.preprocess.to_text().splitlines() if rc.preprocess else None}
    doc["model_digest"] = best.digest()
    _write_json(args.history or out.with_suffix(".history.json"), doc)
    log.info("saved %s (best epoch %d of %d)", out, hist.best_epoch, hist.epochs_run)
    return 0


# ---------------------------------------------------------------- cv

def cmd_cv(args):
    rc = load_run_config(args.config, _train_overrides(args))
    data = _dataset(args.manifest, rc, args)
    out = Path(args.out_dir)
    result = run_cv(data, rc.arch, rc.train, args.folds, out, top_k=args.top_k,
                    policy=rc.augment, preprocess=rc.preprocess)
    (out / "ensemble.txt").write_text(
        "".join(f"{result.folds[i].model}\n" for i in result.selected))
    for f in result.folds:
        log.info("fold %d auroc %.4f auprc %.4f epochs %d", f.fold, f.val_auroc, f.val_auprc,
                 f.epochs_run)
    log.info("selected folds %s", result.selected)
    return 0


# ---------------------------------------------------------------- eval / predict

def _model_paths(args):
    paths = [Path(p) for p in (args.model or [])]
    if getattr(args, "ensemble", None):
        listing = Path(args.ensemble)
        for line in listing.read_text().splitlines():
            if line.strip():
                p = Path(line.strip())
                paths.append(p if p.is_absolute() else listing.parent / p)
    if not paths:
        raise FundusScreenError("at least one --model (or --ensemble) is required")
    return paths


def _load_models(paths):
    models = []
    for p in paths:
        if not p.is_file():
            raise FundusScreenError(f"model file not found: {p}")
        models.append(load_model(p))
    return models


def _tta_policy(args):
    if not args.tta:
        return None
    rc = load_run_config(args.config)
    views = tuple(args.tta_views.split(",")) if args.tta_views else rc.augment.tta_views
    return rc.augment.replace(tta=True, tta_views=views)


def cmd_eval(args):
    models = _load_models(_model_paths(args))
    threshold = args.threshold if args.threshold is not None \
        else load_run_config(args.config).threshold
    manifest = load_manifest(args.manifest, binarize=args.binarize)
    images = map_ordered(lambda e: read_image(manifest.resolve(e)), manifest.entries)
    scores = ensemble_predict_raw(models, images, _tta_policy(args), raw=args.raw)
    labels = manifest.labels
    if args.scores:
        metrics.write_scores_csv(args.scores, manifest.ids, scores, labels)
    try:
        rep = metrics.report(scores, labels, threshold)
    except UndefinedMetricError as exc:
        log.error("%s", exc)
        return 1
    if args.report:
        Path(args.report).write_text(rep.to_json())
    print(f"auroc {rep.auroc:.6f} auprc {rep.auprc:.6f} sensitivity {rep.sensitivity:.6f} "
          f"specificity {rep.specificity:.6f} threshold {rep.threshold:g}")
    return 0


def cmd_predict(args):
    models = _load_models(_model_paths(args))
    img = read_image(args.image)
    prob = ensemble_predict_raw(models, [img], _tta_policy(args), raw=args.raw)[0]
    print(f"{args.image}\t{prob:.6f}")
    return 0


# ---------------------------------------------------------------- synth

def cmd_synth(args):
    splits = synthetic.blob_splits(args.seed, args.n_train, args.n_val, args.n_test, args.kind)
    for name, data in zip(("train", "val", "test"), splits):
        path = synthetic.write_dataset(data, Path(args.out_dir) / name)
        print(path)
    return 0


# ---------------------------------------------------------------- parser

def _add_train_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--arch", choices=["plain", "multilevel"])
    p.add_argument("--epochs", type=positive_int)
    p.add_argument("--lr", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--patience", type=positive_int)
    p.add_argument("--batch-size", type=positive_int)
    p.add_argument("--input-size", type=positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--binarize", action="store_true", help="map 0-4 DR grades to referable")
    p.add_argument("--apply-preprocess", action="store_true",
                   help="preprocess manifest images on load using the config's preprocess keys")


def _add_inference_flags(p):
    p.add_argument("--model", action="append", help="model file (repeat for an ensemble)")
    p.add_argument("--config", help="flat key=value config file (augment keys drive --tta)")
    p.add_argument("--tta", action="store_true", help="average over the test-time view set")
    p.add_argument("--tta-views", help=f"comma list from {','.join(TTA_VIEWS)}")
    p.add_argument("--raw", action="store_true", help="skip the models' embedded preprocessing")


def build_parser():
    parser = argparse.ArgumentParser(prog="fundus-screen", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="crop, resize and color-normalize a directory")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--crop", type=positive_int)
    p.add_argument("--resize", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--amp", type=float)
    p.add_argument("--offset", type=float)
    p.add_argument("--config")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train (or fine-tune with --init) one model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--val-manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init", help="start from this model (fine-tuning)")
    p.add_argument("--history", help="history JSON path (default: <out>.history.json)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="stratified k-fold CV plus top-k selection")
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", type=fold_count, default=5)
    p.add_argument("--top-k", type=positive_int, default=3)
    p.add_argument("--out-dir", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("eval", help="score a manifest and write metrics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ensemble", help="ensemble.txt written by the cv command")
    p.add_argument("--threshold", type=float)
    p.add_argument("--report", help="metrics JSON output")
    p.add_argument("--scores", help="id,score,label CSV output")
    p.add_argument("--binarize", action="store_true")
    _add_inference_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="probability for a single image")
    p.add_argument("--image", required=True)
    _add_inference_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="write the synthetic blob dataset (train/val/test)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", choices=sorted(synthetic.SHAPES), default="blob")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=positive_int, default=200)
    p.add_argument("--n-val", type=positive_int, default=50)
    p.add_argument("--n-test", type=positive_int, default=50)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (FundusScreenError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
