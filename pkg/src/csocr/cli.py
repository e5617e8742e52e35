"""Command-line entry point: ``csocr <subcommand> ...``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage
error.  Every output is a file; stdout only gets a one-line summary.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import imaging
from .classifier import TrainConfig, load_model, save_model, train_ovo_ecoc
from .datasets import (binarize_majority, load_dataset, save_dataset,
                       synth_digits)
from .evaluation import ConfusionMatrix, metrics_from_confusion, repeated_eval
from .pnm import read_gray, write_binary, write_gray
from .reconstruction import (ANISOTROPIC, ISOTROPIC, BpParams, TvParams,
                             basis_pursuit, tv_reconstruct)
from .sensing import (ResourceLimitError, bernoulli_matrix, measure_batch,
                      min_measurements, read_features_csv, read_matrix_csv,
                      write_features_csv, write_matrix_csv)

_VARIANTS = {"iso": ISOTROPIC, "aniso": ANISOTROPIC}


def _write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_text(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _dataset_from_args(args):
    if args.dataset:
        ds = load_dataset(args.dataset, size=args.size)
        info = {"source": "directory", "path": os.path.abspath(args.dataset)}
    else:
        ds = synth_digits(args.synthetic, seed=args.seed,
                          shift_max=args.shift_max, noise_rate=args.noise_rate)
        info = {"source": "synthetic", "per_class": args.synthetic,
                "seed": args.seed, "shift_max": args.shift_max,
                "noise_rate": args.noise_rate}
    return ds, info


def _train_config(args):
    return TrainConfig(c=args.c, tolerance=args.tolerance, seed=args.seed,
                       standardize=getattr(args, "standardize", False))


# --- subcommands --------------------------------------------------------------

def cmd_segment(args):
    img = read_gray(args.input)
    binary = imaging.binarize_adaptive(img, window=args.window,
                                       offset=args.offset,
                                       polarity=args.polarity)
    comps = imaging.filter_small(
        imaging.connected_components(binary, args.connectivity),
        args.min_pixels)
    os.makedirs(args.out, exist_ok=True)
    entries = []
    for k, comp in enumerate(comps):
        seg = imaging.normalize_segment(comp, args.size)
        name = f"seg_{k:03d}.pgm"
        write_binary(os.path.join(args.out, name), seg.image)
        entries.append({"file": name, "bbox": list(comp.bbox),
                        "pixel_count": comp.pixel_count})
    _write_json(os.path.join(args.out, "manifest.json"), {
        "input": os.path.basename(args.input),
        "params": {"window": args.window, "offset": args.offset,
                   "polarity": args.polarity, "min_pixels": args.min_pixels,
                   "connectivity": args.connectivity, "size": args.size},
        "segments": entries,
    })
    print(f"{len(entries)} segment(s) written to {args.out}")


def _image_signal(path, size):
    mask = binarize_majority(read_gray(path).pixels)
    if mask.shape != (size, size):
        mask = imaging.resize_binary(mask, size).pixels
    return mask.ravel().astype(float)


def cmd_sense(args):
    if args.sparsity is not None:
        bound = min_measurements(args.sparsity, args.n, args.bound_c)
        print(f"m >= {bound} for s={args.sparsity}, N={args.n}, "
              f"C={args.bound_c} (natural log)")
    if args.matrix_in:
        A = read_matrix_csv(args.matrix_in)
    else:
        A = bernoulli_matrix(args.m, args.n, args.seed)
    if args.matrix_out:
        write_matrix_csv(args.matrix_out, A)
    signals, labels = None, None
    if args.dataset or args.synthetic:
        ds, _ = _dataset_from_args(args)
        signals, labels = ds.signals(), ds.labels.tolist()
    elif args.images:
        signals = np.array([_image_signal(p, args.size) for p in args.images])
    if signals is not None:
        if not args.features_out:
            raise ValueError("--features-out is required when measuring data")
        write_features_csv(args.features_out, measure_batch(A, signals), labels)
        print(f"{len(signals)} sample(s) measured with a {A.m}x{A.N} matrix")
    else:
        print(f"{A.m}x{A.N} Bernoulli matrix (seed {A.seed})")


def cmd_reconstruct(args):
    A = read_matrix_csv(args.matrix)
    F, _ = read_features_csv(args.features)
    if F.shape[1] != A.m:
        raise ValueError(
            f"dimension mismatch: features have {F.shape[1]} columns but the "
            f"matrix has {A.m} rows")
    side = math.isqrt(A.N)
    rows = range(F.shape[0]) if args.rows is None else args.rows
    os.makedirs(args.out, exist_ok=True)
    reports = []
    for k in rows:
        y = F[k]
        if args.method == "tv":
            if side * side != A.N:
                raise ValueError(f"TV needs a square image; N={A.N}")
            params = TvParams(epsilon=args.epsilon,
                              max_iterations=args.max_iterations,
                              variant=_VARIANTS[args.tv_variant])
            res = tv_reconstruct(A, y, (side, side), params)
        else:
            res = basis_pursuit(A, y, BpParams(max_iterations=args.max_iterations))
        entry = dict(res.report(), row=int(k), method=args.method)
        if side * side == A.N:
            name = f"recon_{k:03d}.pgm"
            write_gray(os.path.join(args.out, name), res.x_hat.reshape(side, side))
            entry["file"] = name
        reports.append(entry)
    _write_json(os.path.join(args.out, "reconstruction.json"), reports)
    print(f"{len(reports)} reconstruction(s) written to {args.out}")


def cmd_train(args):
    F, labels = read_features_csv(args.features)
    if any(lab is None for lab in labels):
        raise ValueError("training features must all be labelled")
    model = train_ovo_ecoc(F, labels, _train_config(args))
    save_model(args.model_out, model)
    print(f"{len(model.binary_models)} binary model(s) over "
          f"{len(model.classes)} classes saved to {args.model_out}")


def cmd_predict(args):
    model = load_model(args.model)
    F, labels = read_features_csv(args.features)
    predicted = model.predict(F)
    lines = ["index,predicted,true"]
    for k, (p, t) in enumerate(zip(predicted, labels)):
        lines.append(f"{k},{p},{'?' if t is None else t}")
    _write_text(args.out, "\n".join(lines) + "\n")
    if all(t is not None for t in labels):
        cm = ConfusionMatrix.from_labels(model.classes, labels, predicted)
        _, acc = metrics_from_confusion(cm)
        print(f"{len(predicted)} prediction(s), accuracy {acc:.3f}%")
    else:
        print(f"{len(predicted)} prediction(s) written to {args.out}")


def cmd_evaluate(args):
    ds, info = _dataset_from_args(args)
    report = repeated_eval(ds, args.m, runs=args.runs, base_seed=args.seed,
                           train_cfg=_train_config(args),
                           train_fraction=args.train_frac,
                           stratified=not args.no_stratify, jobs=args.jobs,
                           dataset_info=info)
    os.makedirs(args.out, exist_ok=True)
    _write_text(os.path.join(args.out, "report.json"), report.to_json())
    _write_text(os.path.join(args.out, "report.csv"), report.to_csv())
    _write_text(os.path.join(args.out, "accuracy.csv"), report.accuracy_csv())
    total = ConfusionMatrix(report.confusion[0].classes,
                            sum(cm.counts for cm in report.confusion))
    _write_text(os.path.join(args.out, "confusion_total.csv"), total.to_csv())
    for r, cm in enumerate(report.confusion):
        _write_text(os.path.join(args.out, f"confusion_run_{r:02d}.csv"),
                    cm.to_csv())
    print(f"m={args.m} runs={args.runs}: mean {report.mean_accuracy:.3f}% "
          f"min {report.min_accuracy:.3f}% max {report.max_accuracy:.3f}%")


def cmd_synth(args):
    ds = synth_digits(args.synthetic, seed=args.seed, shift_max=args.shift_max,
                      noise_rate=args.noise_rate)
    paths = save_dataset(ds, args.out)
    print(f"{len(paths)} image(s) written to {args.out}")


# --- parser -------------------------------------------------------------------

def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_seed(p, default=0):
    p.add_argument("--seed", type=int, default=default,
                   help="seed for every random draw")


def _add_synth(p, required=False):
    if required:
        p.add_argument("--per-class", "--synthetic", dest="synthetic",
                       type=_positive_int, default=101,
                       help="images per digit")
    p.add_argument("--shift-max", type=int, default=2,
                   help="largest random shift in pixels")
    p.add_argument("--noise-rate", type=float, default=0.02,
                   help="per-pixel flip probability")


def _add_source(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", help="directory with one folder per label")
    src.add_argument("--synthetic", type=_positive_int, metavar="PER_CLASS",
                     help="generate PER_CLASS synthetic images per digit")
    _add_synth(p)
    p.add_argument("--size", type=int, default=imaging.DEFAULT_SEGMENT_SIZE,
                   help="segment side length S")


def _add_train(p):
    p.add_argument("--c", type=float, default=1.0, help="SVM soft-margin penalty")
    p.add_argument("--tolerance", type=float, default=1e-3,
                   help="SMO optimality tolerance")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="csocr", formatter_class=fmt,
        description="Compressive-sensing features and one-vs-one SVMs "
                    "for character images.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", formatter_class=fmt,
                       help="split an image into normalised character segments")
    p.add_argument("input", help="PGM or PNG image")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--window", type=int, default=imaging.DEFAULT_WINDOW,
                   help="adaptive threshold window (odd)")
    p.add_argument("--offset", type=float, default=imaging.DEFAULT_OFFSET,
                   help="threshold offset below/above the local mean")
    p.add_argument("--polarity", default=imaging.DARK_ON_LIGHT,
                   choices=[imaging.DARK_ON_LIGHT, imaging.LIGHT_ON_DARK])
    p.add_argument("--min-pixels", type=int, default=imaging.DEFAULT_MIN_PIXELS,
                   help="discard components with fewer pixels")
    p.add_argument("--connectivity", type=int, default=8, choices=[4, 8])
    p.add_argument("--size", type=int, default=imaging.DEFAULT_SEGMENT_SIZE,
                   help="segment side length S")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("sense", formatter_class=fmt,
                       help="generate a Bernoulli matrix and measure images")
    p.add_argument("--m", type=_positive_int, default=64,
                   help="number of measurements (features)")
    p.add_argument("--n", type=_positive_int, default=256,
                   help="signal length N = S*S")
    _add_seed(p)
    p.add_argument("--matrix-out", help="write the matrix as CSV")
    p.add_argument("--matrix-in", help="reuse a matrix CSV instead of drawing one")
    p.add_argument("--features-out", help="feature CSV (m columns + label)")
    p.add_argument("--images", nargs="+", help="unlabelled images to measure")
    p.add_argument("--sparsity", type=int,
                   help="print the bound m >= C*s*ln(N/s) (natural log) for this s")
    p.add_argument("--bound-c", type=float, default=1.0,
                   help="constant C of the measurement bound")
    _add_source(p)
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("reconstruct", formatter_class=fmt,
                       help="recover signals from measurements")
    p.add_argument("--matrix", required=True, help="matrix CSV")
    p.add_argument("--features", required=True, help="feature CSV")
    p.add_argument("--method", choices=["tv", "bp"], default="tv")
    p.add_argument("--epsilon", type=float, default=None,
                   help="residual bound; default 1e-3*||y||")
    p.add_argument("--tv-variant", choices=sorted(_VARIANTS), default="iso")
    p.add_argument("--max-iterations", type=_positive_int, default=5000)
    p.add_argument("--rows", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma separated feature rows (default: all)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("train", formatter_class=fmt,
                       help="train a one-vs-one ECOC linear SVM")
    p.add_argument("--features", required=True, help="labelled feature CSV")
    p.add_argument("--model-out", required=True, help="model JSON")
    p.add_argument("--standardize", action="store_true",
                   help="standardise each feature dimension before training")
    _add_train(p)
    _add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", formatter_class=fmt,
                       help="classify feature vectors with a trained model")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--features", required=True, help="feature CSV")
    p.add_argument("--out", required=True, help="predictions CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", formatter_class=fmt,
                       help="repeated hold-out evaluation")
    _add_source(p)
    p.add_argument("--m", type=_positive_int, default=64,
                   help="number of measurements (features)")
    p.add_argument("--runs", type=_positive_int, default=20)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--no-stratify", action="store_true",
                   help="split without per-class stratification")
    _add_train(p)
    _add_seed(p)
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="worker processes; results do not depend on it")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", formatter_class=fmt,
                       help="write a synthetic digit image set")
    _add_synth(p, required=True)
    _add_seed(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "evaluate" and not (args.dataset or args.synthetic):
            parser.error("evaluate needs --dataset or --synthetic")
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (ValueError, OSError, ResourceLimitError) as exc:
        print(f"csocr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
