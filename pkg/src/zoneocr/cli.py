"""Command-line entry point: ``zoneocr <command> ...``.

Exit codes: 0 success, 1 runtime/data error, 2 usage error.
Standard output carries ``key=value`` lines only; logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .evaluate import (
    DEFAULT_EPOCHS,
    DEFAULT_FRACTIONS,
    DEFAULT_KS,
    evaluate_knn_split,
    evaluate_mlp,
    stratified_split,
    sweep_epochs,
    sweep_k,
    sweep_split,
)
from .knn import knn_fit, knn_predict, load_knn_model, save_knn_model
from .mlp import TrainHyperparams, load_mlp_model, mlp_predict, save_mlp_model
from .preprocess import PreprocessConfig, preprocess_pipeline
from .raster import DatasetError, PgmError, load_dataset, read_pgm_file
from .synth import SynthConfig, gen_corpus
from .zoning import (
    GridSpec,
    diagnostics_to_csv,
    extract_all,
    load_features,
    save_features,
    zone_densities,
)

log = logging.getLogger("zoneocr")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(path: Path, command: str, config: dict, inputs: list, outputs: list, started: str) -> None:
    seeds = {k: v for k, v in config.items() if "seed" in k}
    doc = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "started": started,
        "finished": _now(),
    }
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n", encoding="utf-8")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _grid(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _check_fraction(f: float) -> None:
    if not 0 < f < 1:
        raise UsageError(f"train fraction must lie strictly between 0 and 1, got {f}")


def _hparams(args) -> TrainHyperparams:
    try:
        return TrainHyperparams(args.lr, args.epochs, args.shuffle_seed, args.h1, args.h2,
                                not args.no_standardize)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _out(path_arg, features: Path, default_name: str) -> Path:
    return Path(path_arg) if path_arg else features.with_name(default_name)


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    started = _now()
    try:
        cfg = SynthConfig.from_json(Path(args.config).read_text()) if args.config else SynthConfig()
        overrides = {"n_classes": args.classes, "samples_per_class": args.samples, "master_seed": args.seed}
        cfg = SynthConfig(**{**asdict(cfg), **{k: v for k, v in overrides.items() if v is not None}})
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    ds = gen_corpus(cfg, out)
    write_manifest(out / "manifest.json", "gen", {**_config(args), "synth": asdict(cfg)},
                   [], [out], started)
    print(f"samples={len(ds)}")
    print(f"classes={cfg.n_classes}")
    return 0


def cmd_extract(args) -> int:
    started = _now()
    data = Path(args.data)
    if not data.is_dir():
        raise DatasetError(f"dataset directory not found: {data}")
    try:
        pcfg = PreprocessConfig(args.canvas, args.canvas, args.specks, args.threshold)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = load_dataset(data)
    table = extract_all(ds, pcfg, args.grid)
    out = Path(args.out)
    save_features(out, table, pcfg)
    diag = Path(args.diagnostics) if args.diagnostics else out.with_name(out.name + ".diagnostics.csv")
    diag.write_text(diagnostics_to_csv(table), encoding="utf-8")
    write_manifest(out.with_name(out.name + ".manifest.json"), "extract",
                   {**_config(args), "grid": str(args.grid), "preprocess": asdict(pcfg)},
                   [data], [out, diag], started)
    print(f"rows={len(table)}")
    print(f"features={table.grid.size}")
    return 0


def cmd_eval_knn(args) -> int:
    started = _now()
    _check_fraction(args.train_frac)
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    features = Path(args.features)
    table = load_features(features)
    train, test = stratified_split(table, args.train_frac, args.seed)
    report = evaluate_knn_split(train, test, args.k)
    out = _out(args.out, features, "eval-knn.json")
    out.write_text(report.to_json(), encoding="utf-8")
    outputs = [out]
    if args.model_out:
        save_knn_model(args.model_out, knn_fit(train))
        outputs.append(Path(args.model_out))
    write_manifest(out.with_name(out.name + ".manifest.json"), "eval-knn", _config(args),
                   [features], outputs, started)
    print(f"accuracy={report.overall_accuracy!r}")
    return 0


def cmd_eval_mlp(args) -> int:
    started = _now()
    _check_fraction(args.train_frac)
    hp = _hparams(args)
    features = Path(args.features)
    table = load_features(features)
    report, trace, model = evaluate_mlp(table, hp, args.train_frac, args.seed, return_model=True)
    model.meta = {
        "grid": str(table.grid),
        "classes": [[c, n] for c, n in table.classes],
        "preprocess": asdict(table.preprocess or PreprocessConfig()),
    }
    out = _out(args.out, features, "eval-mlp.json")
    model_out = _out(args.model_out, features, "mlp-model.json")
    trace_out = _out(args.trace_out, features, "mlp-trace.csv")
    out.write_text(report.to_json(), encoding="utf-8")
    save_mlp_model(model_out, model)
    trace_out.write_text(trace.to_csv(), encoding="utf-8")
    write_manifest(out.with_name(out.name + ".manifest.json"), "eval-mlp",
                   {**_config(args), "hyperparams": asdict(hp)},
                   [features], [out, model_out, trace_out], started)
    print(f"accuracy={report.overall_accuracy!r}")
    return 0


def _print_curve(curve, prefix: str = "") -> None:
    for x, acc, sec in curve.points:
        print(f"{prefix}x={x:g} accuracy={acc!r} seconds={sec:.3f}")


def cmd_sweep_k(args) -> int:
    started = _now()
    _check_fraction(args.train_frac)
    if not args.ks or any(k < 1 for k in args.ks) or sorted(set(args.ks)) != args.ks:
        raise UsageError("--ks must be strictly increasing positive integers")
    features = Path(args.features)
    curve = sweep_k(load_features(features), args.ks, args.train_frac, args.seed)
    out = _out(args.out, features, "sweep-k.csv")
    out.write_text(curve.to_csv(), encoding="utf-8")
    write_manifest(out.with_name(out.name + ".manifest.json"), "sweep-k", _config(args),
                   [features], [out], started)
    _print_curve(curve)
    return 0


def cmd_sweep_split(args) -> int:
    started = _now()
    for f in args.fractions:
        _check_fraction(f)
    if sorted(set(args.fractions)) != args.fractions:
        raise UsageError("--fractions must be strictly increasing")
    hp = _hparams(args)
    features = Path(args.features)
    if args.timing_repeats < 1:
        raise UsageError("--timing-repeats must be >= 1")
    knn_curve, mlp_curve = sweep_split(load_features(features), args.fractions, hp, args.seed, args.k,
                                       args.timing_repeats)
    knn_out = _out(args.knn_out, features, "sweep-split-knn.csv")
    mlp_out = _out(args.mlp_out, features, "sweep-split-mlp.csv")
    knn_out.write_text(knn_curve.to_csv(), encoding="utf-8")
    mlp_out.write_text(mlp_curve.to_csv(), encoding="utf-8")
    write_manifest(mlp_out.with_name(mlp_out.name + ".manifest.json"), "sweep-split",
                   {**_config(args), "hyperparams": asdict(hp)},
                   [features], [knn_out, mlp_out], started)
    _print_curve(knn_curve, "model=knn ")
    _print_curve(mlp_curve, "model=mlp ")
    return 0


def cmd_sweep_epochs(args) -> int:
    started = _now()
    _check_fraction(args.train_frac)
    epochs = args.epoch_list
    if not epochs or epochs[0] < 1 or sorted(set(epochs)) != epochs:
        raise UsageError("--epoch-list must be strictly increasing positive integers")
    args.epochs = epochs[-1]
    hp = _hparams(args)
    features = Path(args.features)
    curve, trace = sweep_epochs(load_features(features), epochs, hp, args.train_frac, args.seed)
    out = _out(args.out, features, "sweep-epochs.csv")
    trace_out = _out(args.trace_out, features, "sweep-epochs-trace.csv")
    out.write_text(curve.to_csv(), encoding="utf-8")
    trace_out.write_text(trace.to_csv(), encoding="utf-8")
    write_manifest(out.with_name(out.name + ".manifest.json"), "sweep-epochs",
                   {**_config(args), "hyperparams": asdict(hp)},
                   [features], [out, trace_out], started)
    _print_curve(curve)
    return 0


def cmd_predict(args) -> int:
    model_path = Path(args.model)
    if not model_path.is_file():
        raise DatasetError(f"model file not found: {model_path}")
    text = model_path.read_text(encoding="utf-8")
    img = read_pgm_file(args.image)
    if text.startswith("metric="):
        model = load_knn_model(model_path)
        table = model.table
        pcfg = table.preprocess or PreprocessConfig()
        vec = zone_densities(preprocess_pipeline(img, pcfg), table.grid)
        if args.k > len(table):
            raise ValueError(f"--k {args.k} exceeds the {len(table)} stored rows")
        cid, _ = knn_predict(model, vec, args.k)
        names = dict(table.classes)
    else:
        model = load_mlp_model(model_path)
        meta = model.meta
        grid = GridSpec.parse(meta["grid"]) if "grid" in meta else GridSpec()
        pcfg = PreprocessConfig(**meta["preprocess"]) if "preprocess" in meta else PreprocessConfig()
        if grid.size != model.layer_sizes[0]:
            raise ValueError(f"model grid {grid} does not match its {model.layer_sizes[0]} inputs")
        vec = zone_densities(preprocess_pipeline(img, pcfg), grid)
        cid = mlp_predict(model, vec)
        names = {int(c): n for c, n in meta.get("classes", [])}
    print(f"class_id={cid} class_name={names.get(cid, f'class_{cid}')}")
    return 0


# ---------------------------------------------------------------- parser


def _add_split_args(p, k=False):
    p.add_argument("--features", required=True, help="feature CSV written by `extract`")
    p.add_argument("--train-frac", type=float, default=0.667)
    p.add_argument("--seed", type=int, default=42)
    if k:
        p.add_argument("--k", type=int, default=1)


def _add_mlp_args(p, epochs=True):
    if epochs:
        p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--h1", type=int, default=32)
    p.add_argument("--h2", type=int, default=32)
    p.add_argument("--shuffle-seed", type=int, default=42)
    p.add_argument("--no-standardize", action="store_true",
                   help="feed raw zone densities to the network")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zoneocr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic glyph corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="SynthConfig JSON file; flags override it")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("extract", help="preprocess a dataset and write zoning features")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=_grid, default=GridSpec(4, 4))
    p.add_argument("--canvas", type=int, default=44)
    p.add_argument("--specks", type=int, default=4)
    p.add_argument("--threshold", type=int, help="fixed threshold instead of Otsu")
    p.add_argument("--diagnostics", help="per-sample diagnostics CSV (default <out>.diagnostics.csv)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval-knn", help="train/test a KNN classifier")
    _add_split_args(p, k=True)
    p.add_argument("--out")
    p.add_argument("--model-out", help="also save the fitted KNN model")
    p.set_defaults(func=cmd_eval_knn)

    p = sub.add_parser("eval-mlp", help="train/test the MLP classifier")
    _add_split_args(p)
    _add_mlp_args(p)
    p.add_argument("--out")
    p.add_argument("--model-out")
    p.add_argument("--trace-out")
    p.set_defaults(func=cmd_eval_mlp)

    p = sub.add_parser("sweep-k", help="KNN accuracy for several k on one split")
    _add_split_args(p)
    p.add_argument("--ks", type=_int_list, default=list(DEFAULT_KS))
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("sweep-split", help="KNN and MLP accuracy/time over train fractions")
    p.add_argument("--features", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--fractions", type=_float_list, default=list(DEFAULT_FRACTIONS))
    p.add_argument("--timing-repeats", type=int, default=1,
                   help="train each MLP this many times and keep the fastest time per epoch")
    _add_mlp_args(p)
    p.add_argument("--knn-out")
    p.add_argument("--mlp-out")
    p.set_defaults(func=cmd_sweep_split)

    p = sub.add_parser("sweep-epochs", help="MLP accuracy at several epoch counts of one run")
    _add_split_args(p)
    p.add_argument("--epoch-list", type=_int_list, default=list(DEFAULT_EPOCHS))
    _add_mlp_args(p, epochs=False)
    p.add_argument("--out")
    p.add_argument("--trace-out")
    p.set_defaults(func=cmd_sweep_epochs)

    p = sub.add_parser("predict", help="classify one PGM image")
    p.add_argument("--model", required=True, help="MLP model JSON or KNN model file")
    p.add_argument("--image", required=True)
    p.add_argument("--k", type=int, default=1, help="neighbors, KNN models only")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"zoneocr: error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, PgmError, OSError, ValueError, KeyError) as exc:
        print(f"zoneocr: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
