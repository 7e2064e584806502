"""Minibatch training for DCCA, DCC-LSTM and split autoencoders."""
import copy
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corr import CorrConfig, corr_objective
from .data import SequenceDataset
from .exceptions import ConfigError, DimensionError, TrainingDivergedError
from .nn import (
    BiLstmParams,
    DeepLstm,
    Dense,
    LstmParams,
    MlpParams,
    SplitAeModel,
    deep_lstm_backward,
    deep_lstm_forward,
    mlp_backward,
    mlp_forward,
    pack_sequences,
    splitae_loss,
)
from .validation import check_pair, check_random_state

logger = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "momentum", "adam")
INIT_SCHEMES = ("uniform", "orthogonal")


@dataclass
class TrainConfig:
    batch_size: int = 200
    epochs: int = 10
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_threshold: float | None = None
    seq_len_range: tuple = (10, 20)
    tbptt_window: int | None = None
    init: str = "uniform"
    steps_per_epoch: int | None = None
    eval_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size", "must be at least 2")
        if self.epochs < 0:
            raise ConfigError("epochs", "must be non-negative")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate", "must be non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError("optimizer", f"must be one of {OPTIMIZERS}")
        if self.init not in INIT_SCHEMES:
            raise ConfigError("init", f"must be one of {INIT_SCHEMES}")
        if self.clip_threshold is not None and self.clip_threshold <= 0:
            raise ConfigError("clip_threshold", "must be positive")
        lo, hi = self.seq_len_range
        if lo < 1 or hi < lo:
            raise ConfigError("seq_len_range", "must satisfy 1 <= min <= max")
        if self.tbptt_window is not None and self.tbptt_window < 1:
            raise ConfigError("tbptt_window", "must be positive")


@dataclass
class TrainHistory:
    objective: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    wall_clock: list = field(default_factory=list)

    FIELDS = ("epoch", "objective", "validation", "grad_norm")

    def __len__(self):
        return len(self.objective)

    def append(self, objective, validation, grad_norm, wall_clock):
        self.objective.append(float(objective))
        self.validation.append(float(validation))
        self.grad_norm.append(float(grad_norm))
        self.wall_clock.append(float(wall_clock))

    def lines(self):
        """Header plus one comma-separated line per epoch.

        Wall-clock times are left out so the file is reproducible.
        """
        out = [",".join(self.FIELDS)]
        for e, (o, v, g) in enumerate(zip(self.objective, self.validation, self.grad_norm)):
            out.append(f"{e + 1},{o!r},{v!r},{g!r}")
        return out


# ------------------------------------------------------------ initialization


def init_params(shape, scheme="uniform", rng=None):
    """Random weight matrix: uniform in [-0.1, 0.1], or with orthonormal rows/columns."""
    rng = check_random_state(rng)
    shape = tuple(shape)
    if scheme == "uniform":
        return rng.uniform(-0.1, 0.1, size=shape)
    if scheme != "orthogonal":
        raise ValueError(f"unknown init scheme {scheme!r}")
    if len(shape) != 2:
        raise ValueError("orthogonal init needs a 2-D shape")
    rows, cols = shape
    Q, R = np.linalg.qr(rng.standard_normal((max(rows, cols), min(rows, cols))))
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q if rows >= cols else Q.T


def build_mlp(sizes, activations="sigmoid", scheme="uniform", rng=None):
    """MLP with layer widths ``sizes = [d_in, h_1, ..., d_out]``.

    ``activations`` is one name for every layer or a list with one per layer.
    """
    rng = check_random_state(rng)
    n_layers = len(sizes) - 1
    if isinstance(activations, str):
        activations = [activations] * n_layers
    if len(activations) != n_layers:
        raise ValueError("need one activation per layer")
    return MlpParams([
        Dense(init_params((sizes[i + 1], sizes[i]), scheme, rng), np.zeros(sizes[i + 1]), activations[i])
        for i in range(n_layers)
    ])


def build_lstm(input_size, hidden_size, peephole=True, scheme="uniform", rng=None):
    rng = check_random_state(rng)
    H, D = hidden_size, input_size
    cols = 2 * H + D if peephole else H + D
    W_f, W_i, W_o = (init_params((H, cols), scheme, rng) for _ in range(3))
    W_g = init_params((H, H + D), scheme, rng)
    zeros = [np.zeros(H) for _ in range(4)]
    return LstmParams(W_f, W_i, W_g, W_o, *zeros, peephole=peephole)


def build_bilstm(input_size, hidden_size, output_size, peephole=True, scheme="uniform", rng=None):
    rng = check_random_state(rng)
    fwd = build_lstm(input_size, hidden_size, peephole, scheme, rng)
    bwd = build_lstm(input_size, hidden_size, peephole, scheme, rng)
    W_fwd = init_params((output_size, hidden_size), scheme, rng)
    W_bwd = init_params((output_size, hidden_size), scheme, rng)
    return BiLstmParams(fwd, bwd, W_fwd, W_bwd, np.zeros(output_size))


def build_deep_lstm(input_size, hidden_sizes, peephole=True, bidirectional=False, scheme="uniform", rng=None):
    rng = check_random_state(rng)
    layers = []
    d = input_size
    for h in hidden_sizes:
        if bidirectional:
            layers.append(build_bilstm(d, h, h, peephole, scheme, rng))
        else:
            layers.append(build_lstm(d, h, peephole, scheme, rng))
        d = h
    return DeepLstm(layers)


def build_splitae(architecture, dx, dy, hidden_sizes, code_size, activation="sigmoid",
                  scheme="uniform", rng=None):
    """Split autoencoder whose decoders mirror the encoder widths; reconstructions are linear."""
    rng = check_random_state(rng)
    hidden_sizes = list(hidden_sizes)

    def decoder(d_out):
        sizes = [code_size] + hidden_sizes[::-1] + [d_out]
        acts = [activation] * len(hidden_sizes) + ["identity"]
        return build_mlp(sizes, acts, scheme, rng)

    if architecture == "single":
        enc = build_mlp([dx] + hidden_sizes + [code_size], activation, scheme, rng)
        return SplitAeModel("single", enc, decoder(dx), decoder(dy))
    enc_x = build_mlp([dx] + hidden_sizes, activation, scheme, rng)
    enc_y = build_mlp([dy] + hidden_sizes, activation, scheme, rng)
    hx = hidden_sizes[-1] if hidden_sizes else dx
    hy = hidden_sizes[-1] if hidden_sizes else dy
    return SplitAeModel(
        "pair", enc_x, decoder(dx), decoder(dy), enc_y,
        init_params((code_size, hx), scheme, rng), init_params((code_size, hy), scheme, rng),
        np.zeros(code_size), activation,
    )


# ------------------------------------------------------------------ sampling


def sample_frame_batch(X, Y, m, rng):
    """``m`` aligned frame pairs drawn uniformly with replacement from ``X (d1, n)``, ``Y (d2, n)``."""
    if X.shape[1] == 0:
        raise DimensionError("cannot sample from an empty dataset")
    idx = rng.integers(0, X.shape[1], size=m)
    return X[:, idx], Y[:, idx]


def sample_sequence_batch(dataset, m, len_range, rng):
    """``m`` independent aligned sub-sequences ``(view1 (L, d1), view2 (L, d2))``.

    The length is drawn uniformly from ``len_range`` (capped at the longest
    utterance), then the window uniformly among all windows of that length
    that fit inside a single utterance.
    """
    utts = dataset.utterances if isinstance(dataset, SequenceDataset) else dataset
    if not utts:
        raise DimensionError("cannot sample from an empty dataset")
    lengths = np.array([len(u) for u in utts])
    lo, hi = len_range
    if lengths.max() < lo:
        raise DimensionError(f"no utterance is at least {lo} frames long")
    hi = min(hi, int(lengths.max()))
    batch = []
    for _ in range(m):
        L = int(rng.integers(lo, hi + 1))
        starts = np.maximum(lengths - L + 1, 0)
        pick = int(rng.integers(starts.sum()))
        u = int(np.searchsorted(np.cumsum(starts), pick, side="right"))
        s = pick - int(starts[:u].sum())
        batch.append((utts[u].view1[s:s + L], utts[u].view2[s:s + L]))
    return batch


# --------------------------------------------------------------- optimizers


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_gradients(grads, threshold):
    """Global-norm clipping; returns ``(clipped, norm_before)``."""
    if threshold is None or threshold <= 0:
        raise ValueError("threshold must be positive")
    norm = global_norm(grads)
    if norm <= threshold:
        return list(grads), norm
    scale = threshold / norm
    return [g * scale for g in grads], norm


class Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class Momentum:
    def __init__(self, lr, mu=0.9):
        self.lr = lr
        self.mu = mu
        self.velocity = None

    def step(self, params, grads):
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.mu
            v += g
            p -= self.lr * v


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(cfg):
    if cfg.optimizer == "sgd":
        return Sgd(cfg.learning_rate)
    if cfg.optimizer == "momentum":
        return Momentum(cfg.learning_rate, cfg.momentum)
    return Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)


def _apply(opt, cfg, params, grads):
    """Clip and apply one update; returns the pre-clip gradient norm."""
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise TrainingDivergedError("non-finite gradient encountered")
    if cfg.clip_threshold is not None:
        grads, norm = clip_gradients(grads, cfg.clip_threshold)
        if norm > 100 * cfg.clip_threshold:
            warnings.warn(f"exploding gradient: norm {norm:.3g} before clipping", RuntimeWarning, stacklevel=3)
    else:
        norm = global_norm(grads)
    opt.step(params, grads)
    return norm


def _safe_corr(F, G, corr_cfg):
    try:
        res = corr_objective(F, G, corr_cfg)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise TrainingDivergedError(f"correlation objective failed: {exc}") from exc
    if not np.isfinite(res.corr):
        raise TrainingDivergedError("correlation objective is not finite")
    return res


# ------------------------------------------------------------------ loops


def train_dcca(net1, net2, X, Y, cfg=None, corr_cfg=None, X_val=None, Y_val=None):
    """Train two MLPs so their outputs on ``X (d1, n)`` and ``Y (d2, n)`` are maximally correlated.

    Returns copies of the trained networks and the per-epoch history. The
    validation value is the correlation on a fixed held-out batch.
    """
    cfg = cfg or TrainConfig()
    corr_cfg = corr_cfg or CorrConfig()
    X, Y = check_pair(X, Y, min_samples=2)
    if net1.output_size != net2.output_size:
        raise DimensionError("both networks must have the same output size")
    net1, net2 = copy.deepcopy(net1), copy.deepcopy(net2)
    rng = np.random.default_rng(cfg.seed)
    eval_rng = np.random.default_rng([cfg.seed, 1])
    if X_val is None:
        X_val, Y_val = X, Y
    Xv, Yv = sample_frame_batch(X_val, Y_val, cfg.eval_size or 1000, eval_rng)

    opt = make_optimizer(cfg)
    params = net1.tensors() + net2.tensors()
    steps = cfg.steps_per_epoch or max(1, X.shape[1] // cfg.batch_size)
    history = TrainHistory()
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        corrs, norms = [], []
        for _ in range(steps):
            xb, yb = sample_frame_batch(X, Y, cfg.batch_size, rng)
            F, cache_f = mlp_forward(net1, xb)
            G, cache_g = mlp_forward(net2, yb)
            res = _safe_corr(F, G, corr_cfg)
            g1, _ = mlp_backward(net1, cache_f, -res.grad_F)
            g2, _ = mlp_backward(net2, cache_g, -res.grad_G)
            norms.append(_apply(opt, cfg, params, g1.tensors() + g2.tensors()))
            corrs.append(res.corr)
        val = _safe_corr(mlp_forward(net1, Xv)[0], mlp_forward(net2, Yv)[0], corr_cfg).corr
        history.append(np.mean(corrs), val, np.mean(norms), time.perf_counter() - start)
        logger.info("dcca epoch %d: train corr %.4f, validation corr %.4f", epoch + 1, np.mean(corrs), val)
    return net1, net2, history


def _stack_outputs(stack, seqs):
    X, mask = pack_sequences(seqs)
    return deep_lstm_forward(stack, X, mask)


def train_dcclstm(stack1, stack2, dataset, cfg=None, corr_cfg=None, val_dataset=None):
    """Train two deep LSTMs on i.i.d. sampled aligned sub-sequences.

    Each sampled sequence contributes the top layer's output at its last
    frame as one batch column. With ``cfg.tbptt_window`` set, gradients flow
    back through the last ``window`` steps only.
    """
    cfg = cfg or TrainConfig(batch_size=32)
    corr_cfg = corr_cfg or CorrConfig()
    if stack1.output_size != stack2.output_size:
        raise DimensionError("both stacks must have the same output size")
    if stack1.input_size != dataset.d1 or stack2.input_size != dataset.d2:
        raise DimensionError("stack input sizes do not match the dataset views")
    stack1, stack2 = copy.deepcopy(stack1), copy.deepcopy(stack2)
    rng = np.random.default_rng(cfg.seed)
    eval_rng = np.random.default_rng([cfg.seed, 1])
    val_batch = sample_sequence_batch(val_dataset or dataset, cfg.eval_size or 200, cfg.seq_len_range, eval_rng)
    val1 = [s[0] for s in val_batch]
    val2 = [s[1] for s in val_batch]

    opt = make_optimizer(cfg)
    params = stack1.tensors() + stack2.tensors()
    mean_len = 0.5 * (cfg.seq_len_range[0] + cfg.seq_len_range[1])
    steps = cfg.steps_per_epoch or max(1, int(dataset.n_frames // (cfg.batch_size * mean_len)))
    history = TrainHistory()
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        corrs, norms = [], []
        for _ in range(steps):
            batch = sample_sequence_batch(dataset, cfg.batch_size, cfg.seq_len_range, rng)
            F, cache_f = _stack_outputs(stack1, [b[0] for b in batch])
            G, cache_g = _stack_outputs(stack2, [b[1] for b in batch])
            res = _safe_corr(F, G, corr_cfg)
            g1, _ = deep_lstm_backward(stack1, cache_f, -res.grad_F, cfg.tbptt_window)
            g2, _ = deep_lstm_backward(stack2, cache_g, -res.grad_G, cfg.tbptt_window)
            norms.append(_apply(opt, cfg, params, g1.tensors() + g2.tensors()))
            corrs.append(res.corr)
        val = _safe_corr(_stack_outputs(stack1, val1)[0], _stack_outputs(stack2, val2)[0], corr_cfg).corr
        history.append(np.mean(corrs), val, np.mean(norms), time.perf_counter() - start)
        logger.info("dcclstm epoch %d: train corr %.4f, validation corr %.4f", epoch + 1, np.mean(corrs), val)
    return stack1, stack2, history


def train_splitae(model, X, Y, cfg=None, X_val=None, Y_val=None):
    """Minibatch descent on the split-autoencoder reconstruction loss.

    History values are per-sample losses (the summed loss divided by the batch size).
    """
    cfg = cfg or TrainConfig()
    X, Y = check_pair(X, Y, min_samples=2)
    model = copy.deepcopy(model)
    rng = np.random.default_rng(cfg.seed)
    eval_rng = np.random.default_rng([cfg.seed, 1])
    if X_val is None:
        X_val, Y_val = X, Y
    Xv, Yv = sample_frame_batch(X_val, Y_val, cfg.eval_size or 1000, eval_rng)

    opt = make_optimizer(cfg)
    params = model.tensors()
    steps = cfg.steps_per_epoch or max(1, X.shape[1] // cfg.batch_size)
    history = TrainHistory()
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        losses, norms = [], []
        for _ in range(steps):
            xb, yb = sample_frame_batch(X, Y, cfg.batch_size, rng)
            loss, grads = splitae_loss(model, xb, yb)
            if not np.isfinite(loss):
                raise TrainingDivergedError("reconstruction loss is not finite")
            scale = 1.0 / cfg.batch_size
            norms.append(_apply(opt, cfg, params, [g * scale for g in grads.tensors()]))
            losses.append(loss * scale)
        val = splitae_loss(model, Xv, Yv)[0] / Xv.shape[1]
        history.append(np.mean(losses), val, np.mean(norms), time.perf_counter() - start)
    return model, history
