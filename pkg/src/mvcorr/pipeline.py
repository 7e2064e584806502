"""Per-method fitting and frame representations shared by the CLI and the acceptance tests."""
from dataclasses import asdict, dataclass

import numpy as np

from .cca import cca_transform, fit_cca
from .corr import CorrConfig
from .data import SequenceDataset, Utterance, stack_frames
from .exceptions import ConfigError, DimensionError
from .kcca import KernelSpec, fit_kcca, kcca_transform
from .modelio import ModelBundle, dataset_fingerprint
from .models import lstm_frame_features
from .nn import mlp_forward, splitae_encode
from .train import (
    TrainConfig,
    TrainHistory,
    build_deep_lstm,
    build_mlp,
    build_splitae,
    train_dcca,
    train_dcclstm,
    train_splitae,
)

METHODS = ("baseline", "cca", "kcca", "splitae", "dcca", "dcclstm")


@dataclass(frozen=True)
class ModelConfig:
    """Method hyperparameters; fields a method does not use are ignored."""

    context: int = 3
    k: int = 20
    r_x: float = 1e-4
    r_y: float = 1e-4
    kernel: str = "gaussian"
    degree: int = 2
    offset: float = 1.0
    bandwidth: float | None = None
    kcca_max_samples: int = 2000
    hidden_sizes: tuple = (64,)
    output_size: int = 32
    activation: str = "sigmoid"
    architecture: str = "single"
    peephole: bool = True
    bidirectional: bool = False
    window: int = 20

    def __post_init__(self):
        if self.context < 0:
            raise ConfigError("context", "must be non-negative")
        for name in ("k", "output_size", "window", "kcca_max_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be positive")
        if self.r_x < 0 or self.r_y < 0:
            raise ConfigError("r_x" if self.r_x < 0 else "r_y", "must be non-negative")
        if any(int(h) < 1 for h in self.hidden_sizes):
            raise ConfigError("hidden_sizes", "every width must be positive")
        if self.architecture not in ("single", "pair"):
            raise ConfigError("architecture", "must be 'single' or 'pair'")
        if self.kernel not in ("linear", "polynomial", "gaussian"):
            raise ConfigError("kernel", "must be linear, polynomial or gaussian")


def stacked_dataset(dataset, context):
    """Copy of ``dataset`` whose frames are context-stacked."""
    return SequenceDataset([
        Utterance(stack_frames(u.view1, context), stack_frames(u.view2, context), u.labels, u.speaker)
        for u in dataset.utterances
    ])


def fit_method(method, dataset, model_cfg=None, train_cfg=None, corr_cfg=None):
    """Fit ``method`` on ``dataset``; returns ``(ModelBundle, TrainHistory)``."""
    if method not in METHODS:
        raise ConfigError("method", f"unknown method {method!r}; expected one of {METHODS}")
    mc = model_cfg or ModelConfig()
    tc = train_cfg or TrainConfig()
    cc = corr_cfg or CorrConfig()
    ctx = mc.context
    settings = {"context": ctx, "d1": dataset.d1, "d2": dataset.d2, "window": mc.window}
    history = TrainHistory()
    parts = {}
    rng = np.random.default_rng(tc.seed)
    X, Y = dataset.frames(1, ctx), dataset.frames(2, ctx)
    k = min(mc.k, X.shape[0], Y.shape[0])

    if method == "cca":
        parts["cca"] = fit_cca(X, Y, k, mc.r_x, mc.r_y)
    elif method == "kcca":
        n = X.shape[1]
        idx = np.sort(rng.choice(n, mc.kcca_max_samples, replace=False)) if n > mc.kcca_max_samples else np.arange(n)
        spec = KernelSpec(mc.kernel, mc.degree, mc.offset, mc.bandwidth)
        parts["kcca"] = fit_kcca(X[:, idx], Y[:, idx], min(k, idx.size - 1), None, None, spec, spec)
    elif method == "dcca":
        def net(d):
            sizes = [d, *mc.hidden_sizes, mc.output_size]
            return build_mlp(sizes, [mc.activation] * len(mc.hidden_sizes) + ["identity"], tc.init, rng)
        parts["net_x"], parts["net_y"], history = train_dcca(net(X.shape[0]), net(Y.shape[0]), X, Y, tc, cc)
    elif method == "splitae":
        model = build_splitae(mc.architecture, X.shape[0], Y.shape[0], list(mc.hidden_sizes), mc.output_size,
                              mc.activation, tc.init, rng)
        parts["splitae"], history = train_splitae(model, X, Y, tc)
    elif method == "dcclstm":
        seqs = stacked_dataset(dataset, ctx)
        sizes = [*mc.hidden_sizes, mc.output_size]
        s1 = build_deep_lstm(seqs.d1, sizes, mc.peephole, mc.bidirectional, tc.init, rng)
        s2 = build_deep_lstm(seqs.d2, sizes, mc.peephole, mc.bidirectional, tc.init, rng)
        parts["stack_x"], parts["stack_y"], history = train_dcclstm(s1, s2, seqs, tc, cc)
    bundle = ModelBundle(
        method=method,
        parts=parts,
        settings=settings,
        config={"model": asdict(mc), "train": asdict(tc), "corr": asdict(cc)},
        fingerprint=dataset_fingerprint(dataset),
    )
    return bundle, history


def representations(bundle):
    """Per-view functions mapping a raw dataset to one representation column per frame."""
    s, p = bundle.settings, bundle.parts
    ctx = s["context"]

    def stacked(view):
        return lambda d: d.frames(view, ctx)

    def frames_through(view, f):
        return lambda d: f(d.frames(view, ctx))

    m = bundle.method
    if m == "baseline":
        return stacked(1), stacked(2)
    if m == "cca":
        return (frames_through(1, lambda Z: cca_transform(p["cca"], Z, 1)),
                frames_through(2, lambda Z: cca_transform(p["cca"], Z, 2)))
    if m == "kcca":
        return (frames_through(1, lambda Z: kcca_transform(p["kcca"], Z, 1)),
                frames_through(2, lambda Z: kcca_transform(p["kcca"], Z, 2)))
    if m == "dcca":
        return (frames_through(1, lambda Z: mlp_forward(p["net_x"], Z)[0]),
                frames_through(2, lambda Z: mlp_forward(p["net_y"], Z)[0]))
    if m == "splitae":
        ae = p["splitae"]
        second = frames_through(2, lambda Z: splitae_encode(ae, Z, 2)) if ae.architecture == "pair" else stacked(2)
        return frames_through(1, lambda Z: splitae_encode(ae, Z, 1)), second
    if m == "dcclstm":
        def lstm(view, stack):
            key = "view1" if view == 1 else "view2"
            return lambda d: lstm_frame_features(
                stack, [stack_frames(getattr(u, key), ctx) for u in d.utterances], s["window"])
        return lstm(1, p["stack_x"]), lstm(2, p["stack_y"])
    raise ValueError(f"unknown method {m!r}")


def check_compatible(bundle, dataset):
    """Raise :class:`DimensionError` when ``dataset`` views differ from the training views."""
    d1, d2 = bundle.settings["d1"], bundle.settings["d2"]
    if (dataset.d1, dataset.d2) != (d1, d2):
        raise DimensionError(
            f"model was trained on view dims ({d1}, {d2}) but the dataset has ({dataset.d1}, {dataset.d2})"
        )
