"""Command-line front end: ``generate``, ``train``, ``evaluate`` and ``gradcheck``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical
failure, 3 gradient check failure.
"""
import argparse
import logging
import os
import sys
from collections import Counter
from dataclasses import asdict

import numpy as np

from . import gradcheck
from .config import load_experiment
from .data import generate_synthetic, load_dataset, save_dataset, split_speakers
from .evaluation import evaluate_pipeline
from .exceptions import ConfigError, DatasetFormatError, DimensionError, TrainingDivergedError
from .modelio import load_model, save_model
from .pipeline import check_compatible, fit_method, representations

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_GRADCHECK = 0, 1, 2, 3
DEFAULT_TRAIN_SPEAKERS = 4

DATASET_FILE = "dataset.mvseq"
MODEL_FILE = "model.mvmdl"
HISTORY_FILE = "history.csv"
METRICS_FILE = "metrics.txt"

log = logging.getLogger("mvcorr")


def _add_common(p):
    p.add_argument("--config", metavar="PATH", help="key=value experiment file")
    p.add_argument("--set", dest="overrides", metavar="KEY=VALUE", action="append", default=[],
                   help="override one config entry (repeatable)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--seed", type=int, help="seed for generation, training and evaluation")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mvcorr", description="Generate two-view data, fit and evaluate multi-view models, check gradients.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("generate", help="write a synthetic two-view dataset"))
    _add_common(sub.add_parser("train", help="fit a method and write the model and history"))
    ev = sub.add_parser("evaluate", help="run the downstream tasks and write metrics")
    _add_common(ev)
    ev.add_argument("--model", metavar="PATH", help=f"model file (default: OUT/{MODEL_FILE})")

    gc = sub.add_parser("gradcheck", help="compare a backward pass with finite differences")
    gc.add_argument("method", choices=gradcheck.METHODS)
    gc.add_argument("--size", dest="sizes", metavar="NAME=INT", action="append", default=[],
                    help="problem size, e.g. T=5 or m=32 (repeatable)")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def _dataset(cfg):
    """Load ``data.path`` or generate from the synth settings."""
    if cfg.data_path is None:
        return generate_synthetic(cfg.synth)
    if not os.path.isfile(cfg.data_path):
        raise ConfigError("data.path", f"no such file: {cfg.data_path}")
    return load_dataset(cfg.data_path)


def _split(cfg, dataset):
    speakers = dataset.speakers()
    train = cfg.train_speakers if cfg.train_speakers is not None else tuple(speakers[:DEFAULT_TRAIN_SPEAKERS])
    if cfg.downstream_speakers is not None:
        down = cfg.downstream_speakers
    else:
        down = tuple(s for s in speakers if s not in set(train))
    try:
        return split_speakers(dataset, train, down)
    except ValueError as exc:
        raise ConfigError("data.train_speakers", str(exc)) from None


def _write_lines(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_generate(cfg):
    dataset = generate_synthetic(cfg.synth)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, DATASET_FILE)
    save_dataset(dataset, path)
    hist = Counter(dataset.labels().tolist())
    print(f"wrote {path}")
    print(f"utterances={len(dataset)} frames={dataset.n_frames} speakers={len(dataset.speakers())} "
          f"d1={dataset.d1} d2={dataset.d2}")
    print("class histogram: " + " ".join(f"{c}:{hist[c]}" for c in sorted(hist)))
    return EXIT_OK


def cmd_train(cfg):
    train, _ = _split(cfg, _dataset(cfg))
    if len(train) == 0:
        raise ConfigError("data.train_speakers", "selects no utterances")
    bundle, history = fit_method(cfg.method, train, cfg.model, cfg.train, cfg.corr)
    os.makedirs(cfg.out, exist_ok=True)
    save_model(bundle, os.path.join(cfg.out, MODEL_FILE))
    _write_lines(os.path.join(cfg.out, HISTORY_FILE), history.lines())
    print(f"method={cfg.method} utterances={len(train)} frames={train.n_frames} epochs={len(history)}")
    if len(history):
        print(f"final objective={history.objective[-1]:.6f} validation={history.validation[-1]:.6f}")
    if "cca" in bundle.parts:
        print("canonical correlations: " + " ".join(f"{c:.4f}" for c in bundle.parts["cca"].corrs))
    print(f"wrote {os.path.join(cfg.out, MODEL_FILE)}")
    return EXIT_OK


def cmd_evaluate(cfg, model_path=None):
    model_path = model_path or os.path.join(cfg.out, MODEL_FILE)
    if not os.path.isfile(model_path):
        raise ConfigError("--model", f"no such file: {model_path}")
    dataset = _dataset(cfg)
    bundle = load_model(model_path)
    check_compatible(bundle, dataset)
    _, downstream = _split(cfg, dataset)
    if len(downstream) == 0:
        raise ConfigError("data.downstream_speakers", "selects no utterances")
    rep1, rep2 = representations(bundle)
    report = evaluate_pipeline(rep1, rep2, downstream, cfg.eval, method=bundle.method)
    os.makedirs(cfg.out, exist_ok=True)
    _write_lines(os.path.join(cfg.out, METRICS_FILE), report.metrics_lines())
    print(report.table())
    return EXIT_OK


def cmd_gradcheck(method, sizes, seed=0, perturb=0.0):
    kwargs = {}
    for item in sizes:
        name, sep, value = item.partition("=")
        try:
            kwargs[name.strip()] = int(value)
        except ValueError:
            raise ConfigError(f"--size {name}", f"expected NAME=INT, got {item!r}") from None
    try:
        result = gradcheck.run_gradcheck(method, seed=seed, perturb=perturb, **kwargs)
    except TypeError as exc:
        raise ConfigError("--size", str(exc)) from None
    verdict = "PASS" if result.passed else "FAIL"
    print(f"{method}: max_rel_error={result.max_rel_error:.3e} tolerance={result.tolerance:.0e} "
          f"params={result.n_params} {verdict}")
    return EXIT_OK if result.passed else EXIT_GRADCHECK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args.method, args.sizes, args.seed, args.perturb)
        cfg = load_experiment(args.config, args.overrides, args.seed, args.out)
        log.debug("configuration: %s", asdict(cfg))
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        return cmd_evaluate(cfg, args.model)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDivergedError, DimensionError, DatasetFormatError, OSError, np.linalg.LinAlgError,
            ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
