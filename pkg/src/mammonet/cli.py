"""Command-line pipeline: prepare, train, eval, predict, inspect.

Exit codes: 0 success, 2 configuration problems, 3 I/O or malformed data,
4 numeric failure. `MAMMONET_LOG` picks the stderr log level (error, info,
debug). Every command that owns an output directory writes the fully resolved
configuration there as `config.resolved`; timestamps appear only in the
sidecar `run.log`, keeping all other artifacts byte-reproducible.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import dataset as D
from . import imgio
from . import metrics as M
from . import network as N
from . import preprocess as P
from . import training as TR
from .errors import (ConfigurationError, DimensionError, FormatError,
                     InputError, MammonetError, NumericError)

log = logging.getLogger("mammonet")

# config keys with their parsers; flags override file values, which override these
DEFAULTS = {
    "epochs": 10,
    "learning_rate": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "batch_size": 32,
    "dropout_rate": 0.5,
    "seed": 0,
    "train_fraction": 0.70,
    "median_window": 3,
    "resize": 225,
    "patch_size": 0,
    "patch_overlap": 25,
    "data_root": None,
    "manifest": None,
    "checkpoint": None,
    "out": None,
}

_KEY_PARSERS = {
    "epochs": int, "batch_size": int, "seed": int, "median_window": int,
    "resize": int, "patch_size": int, "patch_overlap": int,
    "learning_rate": float, "beta1": float, "beta2": float, "epsilon": float,
    "dropout_rate": float, "train_fraction": float,
    "data_root": str, "manifest": str, "checkpoint": str, "out": str,
}


def parse_config_file(path: str) -> dict:
    """Flat `key = value` lines; `#` starts a comment; unknown keys are errors."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc.strerror}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{path}:{lineno}: expected `key = value`, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEY_PARSERS:
            raise ConfigurationError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _KEY_PARSERS[key](value)
        except ValueError:
            raise ConfigurationError(
                f"{path}:{lineno}: bad value {value!r} for key {key!r}")
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults <- config file <- command-line flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(parse_config_file(args.config))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def render_resolved(cfg: dict) -> str:
    lines = []
    for key in sorted(cfg):
        value = cfg[key]
        if value is None:
            continue
        shown = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {shown}")
    return "\n".join(lines) + "\n"


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _prepare_out_dir(cfg: dict, default_name: str) -> str:
    out = cfg.get("out") or default_name
    cfg["out"] = out
    os.makedirs(out, exist_ok=True)
    _write_text(os.path.join(out, "config.resolved"), render_resolved(cfg))
    handler = logging.FileHandler(os.path.join(out, "run.log"), encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    return out


def _train_config(cfg: dict, checkpoint_path: str | None) -> TR.TrainConfig:
    frac = cfg["train_fraction"]
    return TR.TrainConfig(
        epochs=cfg["epochs"], learning_rate=cfg["learning_rate"],
        beta1=cfg["beta1"], beta2=cfg["beta2"], epsilon=cfg["epsilon"],
        batch_size=cfg["batch_size"], dropout_rate=cfg["dropout_rate"],
        seed=cfg["seed"], split_fractions=(frac, 1.0 - frac),
        checkpoint_path=checkpoint_path)


def _unique_name(used: set, stem: str) -> str:
    name, n = stem, 1
    while name in used:
        n += 1
        name = f"{stem}_{n}"
    used.add(name)
    return name


def cmd_prepare(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if not cfg.get("data_root"):
        raise ConfigurationError("prepare requires --data (or data_root in the config)")
    out = _prepare_out_dir(cfg, "prepared")
    manifest = D.scan_directory(cfg["data_root"])
    size = cfg["resize"]
    patch, overlap = cfg["patch_size"], cfg["patch_overlap"]

    records = []
    counts = {label: 0 for label in D.LABELS}
    used: dict[str, set] = {label: set() for label in D.LABELS}
    for rec in manifest.records:
        image = imgio.read_image(rec.path)
        conditioned = P.histogram_equalize(
            P.median_filter(image, cfg["median_window"]))
        if patch:
            pieces = [(P.bicubic_resize(p, size, size), f"_r{r}_c{c}")
                      for p, (r, c) in P.extract_patches(conditioned, patch, overlap)]
        else:
            pieces = [(P.bicubic_resize(conditioned, size, size), "")]
        label_dir = os.path.join(out, "images", rec.label)
        os.makedirs(label_dir, exist_ok=True)
        stem = os.path.splitext(os.path.basename(rec.path))[0]
        for prepared, suffix in pieces:
            name = _unique_name(used[rec.label], f"{stem}{suffix}")
            rel = os.path.join("images", rec.label, f"{name}.pgm")
            imgio.write_pgm(os.path.join(out, rel), prepared)
            records.append(D.SampleRecord(
                path=rel, label=rec.label, patient_id=rec.patient_id,
                view=rec.view, laterality=rec.laterality))
            counts[rec.label] += 1

    prepared = D.DatasetManifest(records=records)
    D.write_manifest(prepared, os.path.join(out, "manifest.csv"))
    unmatched = sum(1 for r in records if r.patient_id == D.UNKNOWN)
    report = [f"{label}: {counts[label]}" for label in D.LABELS]
    report += [f"total: {len(records)}", f"unmatched_names: {unmatched}"]
    _write_text(os.path.join(out, "prepare.txt"), "\n".join(report) + "\n")
    log.info("prepared %d image(s) into %s", len(records), out)
    print(f"wrote {len(records)} prepared images and manifest.csv to {out}")
    return 0


def _resolve_record_path(manifest_path: str, rec_path: str) -> str:
    if os.path.isabs(rec_path):
        return rec_path
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), rec_path)


def _load_samples(manifest_path: str, records) -> list[tuple[np.ndarray, int]]:
    size = N.INPUT_SHAPE[:2]
    samples = []
    for rec in records:
        image = imgio.read_image(_resolve_record_path(manifest_path, rec.path))
        if image.shape != size:
            raise InputError(
                f"{rec.path}: model input must be {size[0]}x{size[1]}, "
                f"got {image.shape[0]}x{image.shape[1]}; run `mammonet prepare` first")
        samples.append((P.to_model_input(image), D.label_index(rec.label)))
    return samples


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if not cfg.get("manifest"):
        raise ConfigurationError("train requires --manifest (or manifest in the config)")
    out = _prepare_out_dir(cfg, "run")
    manifest = D.read_manifest(cfg["manifest"])
    if all(rec.split == "" for rec in manifest.records):
        frac = cfg["train_fraction"]
        manifest = TR.split_dataset(manifest, (frac, 1.0 - frac), cfg["seed"])
    # the run-dir copy gets paths re-anchored so it stays usable for `eval`
    copy = D.DatasetManifest(records=[
        replace(rec, path=os.path.relpath(
            _resolve_record_path(cfg["manifest"], rec.path), os.path.abspath(out)))
        for rec in manifest.records])
    D.write_manifest(copy, os.path.join(out, "manifest.csv"))

    train_set = _load_samples(cfg["manifest"], manifest.subset("train"))
    val_set = _load_samples(cfg["manifest"], manifest.subset("val"))
    log.info("training on %d sample(s), validating on %d", len(train_set), len(val_set))

    ckpt_path = cfg.get("checkpoint") or os.path.join(out, "best.ckpt")
    config = _train_config(cfg, ckpt_path)
    model = N.build_reference_model(cfg["seed"], dropout_rate=cfg["dropout_rate"])
    _, logs = TR.train(model, train_set, val_set, config)
    _write_text(os.path.join(out, "curves.csv"), TR.curves_csv(logs))

    for entry in logs:
        log.info("epoch %d: train loss %.4f acc %.4f | val loss %.4f acc %.4f",
                 entry.epoch, entry.train_loss, entry.train_acc,
                 entry.val_loss, entry.val_acc)
    best = max(logs, key=lambda e: (e.val_acc, -e.epoch))
    print(f"best validation accuracy {best.val_acc:.6f} at epoch {best.epoch}; "
          f"checkpoint {ckpt_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if not cfg.get("checkpoint"):
        raise ConfigurationError("eval requires --checkpoint")
    if not cfg.get("manifest"):
        raise ConfigurationError("eval requires --manifest")
    out = _prepare_out_dir(cfg, "eval")
    ckpt = TR.load_checkpoint(cfg["checkpoint"])
    model = TR.model_from_checkpoint(ckpt)
    manifest = D.read_manifest(cfg["manifest"])
    records = (manifest.records if args.split == "all"
               else manifest.subset(args.split))
    if not records:
        raise ConfigurationError(
            f"no samples in split {args.split!r} of {cfg['manifest']}")
    samples = _load_samples(cfg["manifest"], records)

    actuals, predicted = [], []
    for x, y in samples:
        probs, _ = N.forward(model, x, training=False)
        actuals.append(y)
        predicted.append(int(np.argmax(probs)))
    cm = M.ConfusionMatrix.from_predictions(actuals, predicted, D.LABELS)
    report = M.compute_metrics(cm)
    _write_text(os.path.join(out, "metrics.csv"), M.metrics_csv(report))
    _write_text(os.path.join(out, "confusion.txt"), M.matrix_dump(cm))
    log.info("evaluated %d sample(s) from split %s", len(samples), args.split)
    print(M.render_report(report))
    print()
    print(M.render_confusion(cm))
    return 0


def _model_for(args: argparse.Namespace, cfg: dict) -> N.NetworkModel:
    if getattr(args, "reference", False) and cfg.get("checkpoint"):
        raise ConfigurationError("pass either --checkpoint or --reference, not both")
    if cfg.get("checkpoint"):
        return TR.model_from_checkpoint(TR.load_checkpoint(cfg["checkpoint"]))
    return N.build_reference_model(cfg["seed"], dropout_rate=cfg["dropout_rate"])


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    model = _model_for(args, cfg)
    image = imgio.read_image(args.image)
    size = N.INPUT_SHAPE[:2]
    if args.preprocess:
        image = P.prepare_image(image, size=size[0],
                                median_window=cfg["median_window"])
    elif image.shape != size:
        raise InputError(
            f"{args.image}: expected a {size[0]}x{size[1]} image; "
            f"pass --preprocess to condition and resize it first")
    probs, _ = N.forward(model, P.to_model_input(image), training=False)
    labels = D.LABELS if len(probs) == len(D.LABELS) else tuple(
        f"class{i}" for i in range(len(probs)))
    line = labels[int(np.argmax(probs))] + " " + " ".join(
        f"{p:.6f}" for p in probs)
    if cfg.get("out"):
        _prepare_out_dir(cfg, cfg["out"])
        _write_text(os.path.join(cfg["out"], "prediction.txt"), line + "\n")
    print(line)
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    model = _model_for(args, cfg)
    table = N.render_summary(model)
    if cfg.get("out"):
        _prepare_out_dir(cfg, cfg["out"])
        _write_text(os.path.join(cfg["out"], "summary.txt"), table + "\n")
    print(table)
    return 0


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="RNG seed (default 0)")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mammonet",
        description="Three-class mammogram classification pipeline "
                    "(from-scratch CNN engine).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="condition raw images and write the manifest")
    _add_shared(p)
    p.add_argument("--data", dest="data_root",
                   help="dataset root with normal/, benign/, malignant/ dirs")
    p.add_argument("--median-window", dest="median_window", type=int,
                   help="median filter window (odd, default 3)")
    p.add_argument("--resize", type=int, help="output image side (default 225)")
    p.add_argument("--patch-size", dest="patch_size", type=int,
                   help="tile into patches of this side before resizing (0 = off)")
    p.add_argument("--patch-overlap", dest="patch_overlap", type=int,
                   help="patch overlap in pixels (default 25)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train the model from a prepared manifest")
    _add_shared(p)
    p.add_argument("--manifest", help="manifest CSV from `prepare`")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--dropout-rate", dest="dropout_rate", type=float)
    p.add_argument("--train-fraction", dest="train_fraction", type=float,
                   help="training share of the split (default 0.70)")
    p.add_argument("--checkpoint", help="checkpoint path (default <out>/best.ckpt)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against a manifest")
    _add_shared(p)
    p.add_argument("--checkpoint", help="checkpoint file to evaluate")
    p.add_argument("--manifest", help="manifest CSV with split assignments")
    p.add_argument("--split", choices=("val", "train", "all"), default="val")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify one image")
    _add_shared(p)
    p.add_argument("--checkpoint", help="checkpoint file")
    p.add_argument("--reference", action="store_true",
                   help="use a freshly initialized reference model")
    p.add_argument("--image", required=True, help="grayscale image (.pgm or .png)")
    p.add_argument("--preprocess", action="store_true",
                   help="run the full conditioning chain before classifying")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inspect", help="print the layer table of a model")
    _add_shared(p)
    p.add_argument("--checkpoint", help="checkpoint file")
    p.add_argument("--reference", action="store_true",
                   help="inspect a freshly initialized reference model")
    p.set_defaults(func=cmd_inspect)
    return parser


def _setup_logging() -> None:
    # install the stderr handler before validating so the complaint about a
    # bad MAMMONET_LOG value itself reaches the user
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    level_name = os.environ.get("MAMMONET_LOG", "info")
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        raise ConfigurationError(
            f"MAMMONET_LOG must be one of error, info, debug; got {level_name!r}")
    log.setLevel(levels[level_name])


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.func(args)
    except NumericError as exc:
        log.error("%s", exc)
        return 4
    except (InputError, FormatError, DimensionError) as exc:
        log.error("%s", exc)
        return 3
    except MammonetError as exc:
        log.error("%s", exc)
        return 2
    except OSError as exc:
        log.error("%s: %s", exc.filename or "I/O error", exc.strerror or exc)
        return 3
    finally:
        for handler in list(log.handlers):
            log.removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    sys.exit(main())
