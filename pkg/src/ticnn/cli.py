"""Command line front end.

Subcommands:
  params    parameter counts for the four classifier variants
  train     fit a model on a dataset, save weights and a history CSV
  grid      accuracy/loss over a displacement grid, with heatmaps
  aliasing  accuracy vs shift for several pool sizes plus period detection
  curves    perceptual response curves along a transform sequence
  render    turn grid CSVs into PPM heatmaps

Experiment commands read a JSON config (validated against a schema; errors
name the offending field) and write results plus a manifest into an output
directory chosen by --output-dir, the TICNN_OUTPUT_DIR environment variable,
or the working directory, in that order.

Exit codes: 0 success, 1 bad config, 2 bad or missing data file, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .arch import VARIANTS, ArchitectureError, build_toy_variant, build_vgg16_variant, count_parameters
from .datasets import Dataset, IdxFormatError, load_dataset, synthetic_digits
from .estimators import GapCnnClassifier
from .evalgrid import (
    accuracy_vs_shift,
    detect_period,
    evaluate_grid,
    relative_loss_grid,
    summarize,
)
from .fileio import (
    WeightFormatError,
    assign_weights,
    fmt_float,
    joint_bounds,
    load_weights,
    read_grid_csv,
    save_weights,
    write_curve_csv,
    write_grid_csv,
    write_heatmap,
    write_judgments_csv,
    write_manifest,
)
from .nn import Network, init_parameters
from .ops import PoolSpec
from .perceptual import (
    CURVE_METHODS,
    METRIC_VARIANTS,
    MLDSConfig,
    build_response_curve,
    compare_curves,
    simulate_mlds,
    variant_metric,
)
from .stats import DegenerateInputError
from .transforms import GridSpec, apply_affine, apply_aperture, make_affine
from .validation import NumericalError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

OUTPUT_DIR_ENV = "TICNN_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class DataError(RuntimeError):
    """Missing or malformed input data file."""


_DATASET_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["synthetic", "idx"]},
        "n_per_class": {"type": "integer", "minimum": 1},
        "size": {"type": "integer", "minimum": 21},
        "noise": {"type": "number", "minimum": 0},
        "classes": {
            "type": "array",
            "items": {"type": "integer", "minimum": 0, "maximum": 9},
            "minItems": 2,
        },
        "images": {"type": "string"},
        "labels": {"type": "string"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "variant": {"enum": list(VARIANTS)},
        "channels": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 1,
        },
        "pool_size": {"type": "integer", "minimum": 1},
        "pad_mode": {"enum": ["zero", "circular"]},
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "epochs": {"type": "integer", "minimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
    },
    "required": ["variant"],
    "additionalProperties": False,
}

_TRANSFORM_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["translation", "rotation", "scale"]},
        "start": {"type": "number"},
        "stop": {"type": "number"},
        "count": {"type": "integer", "minimum": 3},
        "interp": {"enum": ["nearest", "bilinear"]},
        "fill": {"enum": ["zero", "mosaic"]},
    },
    "required": ["kind", "start", "stop", "count"],
    "additionalProperties": False,
}

_MLDS_SCHEMA = {
    "type": "object",
    "properties": {
        "trials": {"type": "integer", "minimum": 1},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

_APERTURE_SCHEMA = {
    "type": "object",
    "properties": {
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "softness": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMAS = {
    "train": {
        "type": "object",
        "properties": {
            "seed": {"type": "integer", "minimum": 0},
            "dataset": _DATASET_SCHEMA,
            "model": _MODEL_SCHEMA,
        },
        "required": ["dataset", "model"],
        "additionalProperties": False,
    },
    "grid": {
        "type": "object",
        "properties": {
            "seed": {"type": "integer", "minimum": 0},
            "dataset": _DATASET_SCHEMA,
            "model": _MODEL_SCHEMA,
            "weights": {"type": "string"},
            "translator": {"enum": ["mosaic", "circular"]},
            "shifts": {
                "type": "object",
                "properties": {
                    "max": {"type": "integer", "minimum": 0},
                    "step": {"type": "integer", "minimum": 1},
                    "axes": {"enum": ["horizontal", "vertical", "both"]},
                },
                "required": ["max"],
                "additionalProperties": False,
            },
        },
        "required": ["dataset", "model", "shifts"],
        "additionalProperties": False,
    },
    "aliasing": {
        "type": "object",
        "properties": {
            "seed": {"type": "integer", "minimum": 0},
            "dataset": _DATASET_SCHEMA,
            "model": _MODEL_SCHEMA,
            "pool_sizes": {
                "type": "array",
                "items": {"type": "integer", "minimum": 2},
                "minItems": 1,
            },
            "max_shift": {"type": "integer", "minimum": 6},
        },
        "required": ["dataset", "model", "pool_sizes"],
        "additionalProperties": False,
    },
    "curves": {
        "type": "object",
        "properties": {
            "seed": {"type": "integer", "minimum": 0},
            "dataset": _DATASET_SCHEMA,
            "model": _MODEL_SCHEMA,
            "image_index": {"type": "integer", "minimum": 0},
            "transform": _TRANSFORM_SCHEMA,
            "metric": {
                "type": "object",
                "properties": {"variant": {"enum": list(METRIC_VARIANTS)}},
                "required": ["variant"],
                "additionalProperties": False,
            },
            "methods": {
                "type": "array",
                "items": {"enum": list(CURVE_METHODS)},
                "minItems": 1,
            },
            "mlds": _MLDS_SCHEMA,
            "aperture": _APERTURE_SCHEMA,
        },
        "required": ["dataset", "model", "transform", "metric"],
        "additionalProperties": False,
    },
}


def load_config(path, command: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMAS[command])
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "(top level)"
        raise ConfigError(f"{where}: {err.message}")
    _check_dataset_fields(config.get("dataset", {}))
    if command == "grid":
        shifts = config["shifts"]
        if shifts["max"] % shifts.get("step", 1) != 0:
            raise ConfigError("shifts.step: must divide shifts.max")
    if command == "curves":
        tr = config["transform"]
        if tr["kind"] == "scale" and tr["start"] <= 0:
            raise ConfigError("transform.start: scale levels must be positive")
        if tr["stop"] <= tr["start"]:
            raise ConfigError("transform.stop: must exceed transform.start")
    return config


def _check_dataset_fields(ds: dict) -> None:
    if not ds:
        return
    if ds["kind"] == "idx":
        for field in ("images", "labels"):
            if field not in ds:
                raise ConfigError(f"dataset.{field}: required when kind is 'idx'")
    else:
        for field in ("images", "labels"):
            if field in ds:
                raise ConfigError(f"dataset.{field}: only valid when kind is 'idx'")


def _make_dataset(config: dict) -> Dataset:
    ds = config["dataset"]
    if ds["kind"] == "idx":
        try:
            return load_dataset(ds["images"], ds["labels"])
        except OSError as exc:
            raise DataError(str(exc)) from None
    return synthetic_digits(
        n_per_class=ds.get("n_per_class", 20),
        size=ds.get("size", 24),
        noise=ds.get("noise", 0.1),
        seed=config.get("seed", 0),
        classes=tuple(ds.get("classes", range(10))),
    )


def _make_estimator(config: dict, **overrides) -> GapCnnClassifier:
    m = dict(config["model"])
    m.update(overrides)
    return GapCnnClassifier(
        variant=m["variant"],
        channels=tuple(m.get("channels", (8, 16))),
        pool_size=m.get("pool_size", 2),
        pad_mode=m.get("pad_mode", "circular"),
        lr=m.get("lr", 0.05),
        momentum=m.get("momentum", 0.9),
        epochs=m.get("epochs", 10),
        batch_size=m.get("batch_size", 32),
        seed=config.get("seed", 0),
    )


def _resolve_outdir(args) -> Path:
    outdir = Path(args.output_dir or os.environ.get(OUTPUT_DIR_ENV, "."))
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def cmd_params(args) -> int:
    variants = VARIANTS if args.variant == "all" else (args.variant,)
    builder = build_vgg16_variant if args.family == "vgg16" else build_toy_variant
    reports = {
        v: count_parameters(builder(v, input_size=args.input, num_classes=args.classes))
        for v in variants
    }
    if args.json:
        payload = {
            v: {
                "total": r.total,
                "trainable": r.trainable,
                "breakdown": [
                    {"layer": name, "count": count, "trainable": tr}
                    for name, count, tr in r.breakdown
                ],
            }
            for v, r in reports.items()
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"{'variant':<8} {'total':>14} {'trainable':>14}")
    for v, r in reports.items():
        print(f"{v:<8} {r.total:>14,} {r.trainable:>14,}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config, "train")
    outdir = _resolve_outdir(args)
    data = _make_dataset(config)
    est = _make_estimator(config).fit(data.images, data.labels)
    save_weights(outdir / "weights.bin", est.store_)
    with open(outdir / "history.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epoch", "loss", "accuracy"])
        for i, (loss, acc) in enumerate(
            zip(est.history_["loss"], est.history_["accuracy"])
        ):
            w.writerow([i, fmt_float(loss), fmt_float(acc)])
    write_manifest(outdir / "manifest.json", "train", config)
    if est.history_["loss"]:
        print(
            f"trained {est.variant}: final loss {fmt_float(est.history_['loss'][-1])}, "
            f"accuracy {fmt_float(est.history_['accuracy'][-1])}"
        )
    print(f"wrote {outdir / 'weights.bin'}")
    return EXIT_OK


def _model_from_config(config: dict, data: Dataset):
    """Either load saved weights into a fresh model or train one in place."""
    if "weights" in config:
        m = config["model"]
        pool_size = m.get("pool_size", 2)
        spec = build_toy_variant(
            m["variant"],
            channels=tuple(m.get("channels", (8, 16))),
            pool=PoolSpec(pool_size) if pool_size else None,
            input_size=data.images.shape[2],
            num_classes=data.num_classes,
            in_channels=data.images.shape[1],
            pad_mode=m.get("pad_mode", "circular"),
        )
        store = init_parameters(spec, seed=config.get("seed", 0))
        try:
            assign_weights(store, load_weights(config["weights"]))
        except OSError as exc:
            raise DataError(str(exc)) from None
        network = Network(spec)
        return lambda x: network.logits(x, store)
    est = _make_estimator(config).fit(data.images, data.labels)
    return est.decision_function


def cmd_grid(args) -> int:
    config = load_config(args.config, "grid")
    outdir = _resolve_outdir(args)
    data = _make_dataset(config)
    model = _model_from_config(config, data)
    shifts = config["shifts"]
    grid_spec = GridSpec(shifts["max"], shifts.get("step", 1), shifts.get("axes", "both"))
    acc = evaluate_grid(model, data, grid_spec, config.get("translator", "mosaic"))
    loss = relative_loss_grid(acc)

    sx, sy = grid_spec.displacements()
    write_grid_csv(outdir / "accuracy.csv", acc.values, sx, sy)
    write_grid_csv(outdir / "loss.csv", loss.values, sx, sy)
    write_heatmap(acc.values, outdir / "accuracy.ppm", cell_size=16)
    write_heatmap(loss.values, outdir / "loss.ppm", cell_size=16)
    write_manifest(outdir / "manifest.json", "grid", config)
    s = summarize(acc)
    print(
        f"accuracy mean {fmt_float(s.mean_accuracy)} std {fmt_float(s.std_accuracy)}; "
        f"loss mean {fmt_float(s.mean_loss)} std {fmt_float(s.std_loss)}"
    )
    print(f"wrote {outdir / 'accuracy.csv'} and {outdir / 'loss.csv'}")
    return EXIT_OK


def cmd_aliasing(args) -> int:
    config = load_config(args.config, "aliasing")
    outdir = _resolve_outdir(args)
    data = _make_dataset(config)
    pool_sizes = config["pool_sizes"]
    if args.k is not None:
        if args.k < 2:
            raise ConfigError("--k: pool size must be at least 2")
        pool_sizes = [args.k]
    periods = {}
    with open(outdir / "aliasing.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["pool_size", "shift", "accuracy"])
        for k in pool_sizes:
            # Shifts 0..4k by default: four periods if accuracy aliases at k.
            shifts = tuple(range(0, config.get("max_shift", 4 * k) + 1))
            est = _make_estimator(config, pool_size=k).fit(data.images, data.labels)
            acc = accuracy_vs_shift(est, data, shifts, axis="x")
            for s, a in zip(shifts, acc):
                w.writerow([k, s, fmt_float(a)])
            est_period = detect_period(acc)
            periods[str(k)] = {
                "period": est_period.period,
                "confidence": est_period.confidence,
            }
            print(
                f"pool {k}: period {est_period.period} "
                f"confidence {fmt_float(est_period.confidence)}"
            )
    with open(outdir / "periods.json", "w", newline="") as f:
        json.dump(periods, f, indent=2, sort_keys=True)
        f.write("\n")
    write_manifest(outdir / "manifest.json", "aliasing", config)
    return EXIT_OK


def cmd_curves(args) -> int:
    config = load_config(args.config, "curves")
    outdir = _resolve_outdir(args)
    data = _make_dataset(config)
    index = config.get("image_index", 0)
    if index >= len(data):
        raise ConfigError(f"image_index: {index} out of range for {len(data)} images")
    base = data.images[index]

    est = _make_estimator(config).fit(data.images, data.labels)
    metric = variant_metric(config["metric"]["variant"], est.network_, est.store_)

    tr = config["transform"]
    levels = np.linspace(tr["start"], tr["stop"], tr["count"])
    interp = tr.get("interp", "bilinear")
    fill = tr.get("fill", "mosaic")
    images = []
    for lv in levels:
        amount = (float(lv), 0.0) if tr["kind"] == "translation" else float(lv)
        img = apply_affine(base, make_affine(tr["kind"], amount, interp, fill))
        if "aperture" in config:
            ap = config["aperture"]
            img = apply_aperture(img, ap.get("radius"), ap.get("softness", 4.0))
        images.append(img)

    mlds_cfg = MLDSConfig(
        sigma=config.get("mlds", {}).get("sigma", 0.29),
        trials=config.get("mlds", {}).get("trials", 2000),
        seed=config.get("mlds", {}).get("seed", config.get("seed", 0)),
        max_iter=config.get("mlds", {}).get("max_iter", 5000),
    )
    methods = config.get("methods", list(CURVE_METHODS))
    curves = {
        method: build_response_curve(method, images, metric, mlds_cfg, levels)
        for method in methods
    }
    for method, curve in curves.items():
        write_curve_csv(outdir / f"curve_{method}.csv", curve)
    if "mlds" in curves and not curves["mlds"].degenerate:
        orig = curves.get("origdist") or build_response_curve("origdist", images, metric, levels=levels)
        scale = orig.values / float(np.max(np.abs(orig.values)))
        write_judgments_csv(outdir / "judgments.csv", simulate_mlds(scale, mlds_cfg))

    reference = "sequential" if "sequential" in methods else methods[0]
    rows = []
    for method in methods:
        curve = curves[method]
        if method == reference or curve.degenerate:
            note = "reference" if method == reference else "degenerate"
            print(f"{method}: final value {fmt_float(curve.values[-1])} ({note})")
            continue
        diff = compare_curves(curve, curves[reference])
        rows.append((method, diff))
        print(
            f"{method}: final value {fmt_float(curve.values[-1])}, "
            f"vs {reference} mean|diff| {fmt_float(diff.mean_abs_diff)} "
            f"spearman {fmt_float(diff.spearman)}"
        )
    with open(outdir / "diffstats.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["method", "reference", "mean_abs_diff", "std_abs_diff", "spearman", "pearson"])
        for method, d in rows:
            w.writerow(
                [method, reference]
                + [fmt_float(v) for v in (d.mean_abs_diff, d.std_abs_diff, d.spearman, d.pearson)]
            )
    write_manifest(outdir / "manifest.json", "curves", config)
    print(f"wrote {len(curves)} curve files to {outdir}")
    return EXIT_OK


def cmd_render(args) -> int:
    grids = []
    for path in args.grid:
        try:
            values, _, _ = read_grid_csv(path)
        except OSError as exc:
            raise DataError(str(exc)) from None
        except ValueError as exc:
            raise DataError(str(exc)) from None
        grids.append(values)
    if args.out and len(args.grid) != 1:
        raise ConfigError("--out is only valid with a single grid; use --output-dir")
    bounds = joint_bounds(grids) if args.scaling == "joint" else None
    outdir = _resolve_outdir(args)
    for path, values in zip(args.grid, grids):
        out = Path(args.out) if args.out else outdir / (Path(path).stem + ".ppm")
        out.parent.mkdir(parents=True, exist_ok=True)
        sidecar = write_heatmap(
            values, out, scaling=args.scaling, bounds=bounds, cell_size=args.cell_size
        )
        print(f"wrote {out} and {sidecar}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ticnn",
        description="Translation-robustness test bench for tapped-head conv nets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="parameter counts per classifier variant")
    p.add_argument("--variant", choices=("all",) + VARIANTS, default="all")
    p.add_argument("--family", choices=("vgg16", "toy"), default="vgg16")
    p.add_argument("--input", type=int, default=256, help="input image side in pixels")
    p.add_argument("--classes", type=int, default=160, help="number of output classes")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_params)

    for name, func, help_text in (
        ("train", cmd_train, "train a model and save weights"),
        ("grid", cmd_grid, "evaluate over a displacement grid"),
        ("aliasing", cmd_aliasing, "accuracy vs shift per pool size"),
        ("curves", cmd_curves, "perceptual response curves"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--output-dir", default=None)
        if name == "aliasing":
            p.add_argument(
                "--k", type=int, default=None, help="run a single pool size, overriding the config list"
            )
        p.set_defaults(func=func)

    p = sub.add_parser("render", help="render grid CSVs as PPM heatmaps")
    p.add_argument("--grid", required=True, nargs="+", help="grid CSV file(s)")
    p.add_argument("--out", default=None, help="output PPM path (single grid only)")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--scaling", choices=("independent", "joint"), default="independent")
    p.add_argument("--cell-size", type=int, default=16)
    p.set_defaults(func=cmd_render)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def main(argv=None) -> int:
    try:
        return run(argv)
    except (ConfigError, ArchitectureError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, IdxFormatError, WeightFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DegenerateInputError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
