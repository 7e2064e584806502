"""Central finite-difference checks of every hand-written backward pass."""
from dataclasses import dataclass

import numpy as np

from . import nn
from .corr import CorrConfig, corr_objective
from .train import build_bilstm, build_deep_lstm, build_lstm, build_mlp, build_splitae

TOLERANCE = 1e-4
STEP = 1e-5
METHODS = ("mlp", "lstm", "bilstm", "deep_lstm", "splitae", "corr")


@dataclass(frozen=True)
class GradcheckResult:
    method: str
    max_rel_error: float
    n_params: int
    tolerance: float = TOLERANCE

    @property
    def passed(self):
        return bool(self.max_rel_error < self.tolerance)


def numeric_gradient(f, tensors, h=STEP):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``tensors`` (perturbed in place)."""
    out = []
    for t in tensors:
        g = np.zeros_like(t)
        for idx in np.ndindex(t.shape):
            orig = t[idx]
            t[idx] = orig + h
            fp = f()
            t[idx] = orig - h
            fm = f()
            t[idx] = orig
            g[idx] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def max_relative_error(analytic, numeric):
    """Largest per-array error ``max|a - n| / max(max|a|, max|n|)``.

    The denominator is floored at 1e-3 of the largest gradient entry overall so
    arrays whose true gradient vanishes do not divide round-off by zero.
    """
    top = max(max(np.max(np.abs(a)), np.max(np.abs(n))) for a, n in zip(analytic, numeric) if a.size)
    floor = max(1e-3 * top, 1e-12)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size == 0:
            continue
        denom = max(np.max(np.abs(a)), np.max(np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n)) / denom))
    return worst


def _randomize(tensors, rng, scale=0.5):
    for t in tensors:
        t[...] = scale * rng.standard_normal(t.shape)


def _finish(method, analytic, f, tensors, perturb):
    analytic = [np.array(a, dtype=float) for a in analytic]
    if perturb:
        analytic[0].flat[0] += perturb
    numeric = numeric_gradient(f, tensors)
    return GradcheckResult(method, max_relative_error(analytic, numeric), sum(t.size for t in tensors))


def check_corr(o=4, m=32, seed=0, perturb=0.0):
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((o, m))
    G = 0.6 * F + rng.standard_normal((o, m))
    cfg = CorrConfig(1e-3, 1e-3)
    res = corr_objective(F, G, cfg)
    return _finish("corr", [res.grad_F, res.grad_G], lambda: corr_objective(F, G, cfg).corr, [F, G], perturb)


def check_mlp(sizes=(5, 6, 4, 3), seed=0, perturb=0.0):
    rng = np.random.default_rng(seed)
    net = build_mlp(list(sizes), ["tanh", "sigmoid", "identity"][: len(sizes) - 1] or "tanh", rng=rng)
    _randomize(net.tensors(), rng)
    X = rng.standard_normal((sizes[0], 7))
    R = rng.standard_normal((sizes[-1], 7))
    out, cache = nn.mlp_forward(net, X)
    grads, dX = nn.mlp_backward(net, cache, R)
    f = lambda: float(np.sum(R * nn.mlp_forward(net, X)[0]))
    return _finish("mlp", grads.tensors() + [dX], f, net.tensors() + [X], perturb)


def check_lstm(T=5, input_size=3, hidden_size=4, peephole=True, seed=0, perturb=0.0):
    rng = np.random.default_rng(seed)
    params = build_lstm(input_size, hidden_size, peephole, rng=rng)
    _randomize(params.tensors(), rng)
    seq = rng.standard_normal((T, input_size))
    r = rng.standard_normal(hidden_size)
    _, _, cache = nn.lstm_forward(params, seq)
    grads, dseq = nn.lstm_backward(params, cache, d_final=r)
    f = lambda: float(r @ nn.lstm_forward(params, seq)[0])
    return _finish("lstm", grads.tensors() + [dseq], f, params.tensors() + [seq], perturb)


def check_bilstm(T=5, input_size=3, hidden_size=4, output_size=3, seed=0, perturb=0.0):
    rng = np.random.default_rng(seed)
    params = build_bilstm(input_size, hidden_size, output_size, rng=rng)
    _randomize(params.tensors(), rng)
    seq = rng.standard_normal((T, input_size))
    R = rng.standard_normal((T, output_size))
    _, cache = nn.bilstm_forward(params, seq)
    grads, dseq = nn.bilstm_backward(params, cache, R)
    f = lambda: float(np.sum(R * nn.bilstm_forward(params, seq)[0]))
    return _finish("bilstm", grads.tensors() + [dseq], f, params.tensors() + [seq], perturb)


def check_deep_lstm(lengths=(5, 3, 4), input_size=3, hidden_sizes=(4, 3), bidirectional=False,
                    seed=0, perturb=0.0):
    """Final-step gradients of a stacked LSTM on a left-padded variable-length batch."""
    rng = np.random.default_rng(seed)
    stack = build_deep_lstm(input_size, list(hidden_sizes), bidirectional=bidirectional, rng=rng)
    _randomize(stack.tensors(), rng)
    X, mask = nn.pack_sequences([rng.standard_normal((L, input_size)) for L in lengths])
    R = rng.standard_normal((stack.output_size, len(lengths)))
    _, cache = nn.deep_lstm_forward(stack, X, mask)
    grads, dX = nn.deep_lstm_backward(stack, cache, R)
    f = lambda: float(np.sum(R * nn.deep_lstm_forward(stack, X, mask)[0]))
    return _finish("deep_lstm", grads.tensors() + [dX], f, stack.tensors() + [X], perturb)


def check_splitae(architecture="pair", seed=0, perturb=0.0):
    rng = np.random.default_rng(seed)
    model = build_splitae(architecture, 4, 3, [5], 2, rng=rng)
    _randomize(model.tensors(), rng)
    X = rng.standard_normal((4, 6))
    Y = rng.standard_normal((3, 6))
    _, grads = nn.splitae_loss(model, X, Y)
    f = lambda: nn.splitae_loss(model, X, Y)[0]
    return _finish("splitae", grads.tensors(), f, model.tensors(), perturb)


def run_gradcheck(method, seed=0, perturb=0.0, **sizes):
    """Dispatch to the named check; ``sizes`` are forwarded as keyword arguments."""
    checks = {
        "mlp": check_mlp,
        "lstm": check_lstm,
        "bilstm": check_bilstm,
        "deep_lstm": check_deep_lstm,
        "splitae": check_splitae,
        "corr": check_corr,
    }
    if method not in checks:
        raise ValueError(f"unknown gradcheck method {method!r}; expected one of {METHODS}")
    return checks[method](seed=seed, perturb=perturb, **sizes)
