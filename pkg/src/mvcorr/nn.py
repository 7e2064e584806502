"""Neural network blocks with closed-form backward passes.

Every parameter container exposes ``tensors()``, a flat list of its arrays in
a fixed order; gradients are returned as containers of the same type so an
optimizer can zip the two lists. Batched arrays keep samples in the last
axis: an MLP consumes ``(d, n)`` and a recurrent layer ``(T, d, B)``.

Variable-length batches are left-padded: every sequence ends at the last
time step, and a ``(T, B)`` mask marks real frames. Masked steps leave the
recurrent state untouched and emit zeros.
"""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError

ACTIVATIONS = ("sigmoid", "tanh", "identity")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(name, z):
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name, a):
    """Derivative expressed through the activation output ``a``."""
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(a)


# --------------------------------------------------------------------- MLP


@dataclass
class Dense:
    W: np.ndarray
    b: np.ndarray
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise DimensionError(f"inconsistent layer shapes W{self.W.shape} b{self.b.shape}")


@dataclass
class MlpParams:
    layers: list = field(default_factory=list)

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.W.shape[1] != prev.W.shape[0]:
                raise DimensionError("consecutive layer dimensions do not chain")

    @property
    def input_size(self):
        return self.layers[0].W.shape[1] if self.layers else None

    @property
    def output_size(self):
        return self.layers[-1].W.shape[0] if self.layers else None

    def tensors(self):
        return [t for layer in self.layers for t in (layer.W, layer.b)]


def mlp_forward(params, X):
    """Return ``(output, cache)`` for inputs ``X (d, n)``."""
    X = np.asarray(X, dtype=float)
    if params.layers and X.shape[0] != params.input_size:
        raise DimensionError(f"MLP expects {params.input_size} inputs, got {X.shape[0]}")
    acts = [X]
    for layer in params.layers:
        acts.append(_activate(layer.activation, layer.W @ acts[-1] + layer.b[:, None]))
    return acts[-1], acts


def mlp_backward(params, cache, d_out):
    """Backpropagate ``d_out`` (gradient w.r.t. the output); returns ``(grads, dX)``."""
    grads = []
    delta = d_out
    for layer, a_in, a_out in zip(params.layers[::-1], cache[-2::-1], cache[:0:-1]):
        dz = delta * _activation_grad(layer.activation, a_out)
        grads.append(Dense(dz @ a_in.T, dz.sum(axis=1), layer.activation))
        delta = layer.W.T @ dz
    return MlpParams(grads[::-1]), delta


# -------------------------------------------------------------------- LSTM


@dataclass
class LstmParams:
    """Peephole LSTM weights.

    ``W_f``, ``W_i`` and ``W_o`` act on ``[c_{t-1}; h_{t-1}; x_t]`` (the cell
    block is absent when ``peephole`` is false); ``W_g`` always acts on
    ``[h_{t-1}; x_t]``.
    """

    W_f: np.ndarray
    W_i: np.ndarray
    W_g: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray
    peephole: bool = True

    def __post_init__(self):
        H = self.b_f.shape[0]
        D = self.W_g.shape[1] - H
        gate_cols = 2 * H + D if self.peephole else H + D
        for name in ("W_f", "W_i", "W_o"):
            if getattr(self, name).shape != (H, gate_cols):
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected {(H, gate_cols)}")
        if self.W_g.shape[0] != H or D < 1:
            raise DimensionError("W_g must be (hidden, hidden + input)")
        for name in ("b_i", "b_g", "b_o"):
            if getattr(self, name).shape != (H,):
                raise DimensionError(f"{name} must have shape {(H,)}")

    @property
    def hidden_size(self):
        return self.b_f.shape[0]

    @property
    def input_size(self):
        return self.W_g.shape[1] - self.hidden_size

    @property
    def output_size(self):
        return self.hidden_size

    def tensors(self):
        return [self.W_f, self.W_i, self.W_g, self.W_o, self.b_f, self.b_i, self.b_g, self.b_o]


@dataclass
class LstmState:
    c: np.ndarray
    h: np.ndarray


def _gate_inputs(params, c_prev, h_prev, x):
    hx = np.concatenate([h_prev, x], axis=0)
    full = np.concatenate([c_prev, hx], axis=0) if params.peephole else hx
    return full, hx


def _cell(params, c_prev, h_prev, x):
    full, hx = _gate_inputs(params, c_prev, h_prev, x)
    f = sigmoid(params.W_f @ full + params.b_f[:, None])
    i = sigmoid(params.W_i @ full + params.b_i[:, None])
    g = np.tanh(params.W_g @ hx + params.b_g[:, None])
    o = sigmoid(params.W_o @ full + params.b_o[:, None])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    return c, o * tc, (full, hx, f, i, g, o, tc)


def lstm_step(params, state, x_t):
    """One peephole LSTM update; accepts vectors or ``(dim, B)`` batches."""
    x_t = np.asarray(x_t, dtype=float)
    vector = x_t.ndim == 1
    c_prev = np.asarray(state.c, dtype=float)
    h_prev = np.asarray(state.h, dtype=float)
    if vector:
        x_t, c_prev, h_prev = x_t[:, None], c_prev[:, None], h_prev[:, None]
    if x_t.shape[0] != params.input_size or c_prev.shape[0] != params.hidden_size:
        raise DimensionError("state or input size does not match the LSTM parameters")
    c, h, _ = _cell(params, c_prev, h_prev, x_t)
    if vector:
        return LstmState(c[:, 0], h[:, 0])
    return LstmState(c, h)


def _order(T, reverse):
    return range(T - 1, -1, -1) if reverse else range(T)


def lstm_run(params, X, mask=None, reverse=False):
    """Run a cell over ``X (T, D, B)`` from a zero state; returns ``(Y (T, H, B), cache)``."""
    T, D, B = X.shape
    if T < 1:
        raise DimensionError("empty sequence")
    if D != params.input_size:
        raise DimensionError(f"LSTM expects {params.input_size} inputs, got {D}")
    H = params.hidden_size
    m = np.ones((T, 1, B)) if mask is None else np.asarray(mask, dtype=float)[:, None, :]
    c = np.zeros((H, B))
    h = np.zeros((H, B))
    Y = np.zeros((T, H, B))
    steps = {}
    for t in _order(T, reverse):
        c_new, h_new, parts = _cell(params, c, h, X[t])
        steps[t] = (c, parts)
        c = m[t] * c_new + (1.0 - m[t]) * c
        h = m[t] * h_new + (1.0 - m[t]) * h
        Y[t] = m[t] * h
    return Y, {"X": X, "mask": m, "reverse": reverse, "steps": steps}


def lstm_run_backward(params, cache, dY, window=None):
    """Backpropagation through time for :func:`lstm_run`.

    ``window`` truncates the recursion to the last ``window`` processed steps
    (truncated BPTT); ``None`` backpropagates through the whole sequence.
    """
    X, m, reverse = cache["X"], cache["mask"], cache["reverse"]
    T, _, B = X.shape
    H = params.hidden_size
    grads = [np.zeros_like(t) for t in params.tensors()]
    dW_f, dW_i, dW_g, dW_o, db_f, db_i, db_g, db_o = grads
    dX = np.zeros_like(X)
    dh = np.zeros((H, B))
    dc = np.zeros((H, B))
    order = list(_order(T, reverse))[::-1]
    if window is not None:
        order = order[:window]
    for t in order:
        c_prev, (full, hx, f, i, g, o, tc) = cache["steps"][t]
        mt = m[t]
        dh = dh + mt * dY[t]
        dh_new, dc_new = mt * dh, mt * dc
        dh, dc = (1.0 - mt) * dh, (1.0 - mt) * dc

        dc_new = dc_new + dh_new * o * (1.0 - tc * tc)
        dzo = dh_new * tc * o * (1.0 - o)
        dzf = dc_new * c_prev * f * (1.0 - f)
        dzi = dc_new * g * i * (1.0 - i)
        dzg = dc_new * i * (1.0 - g * g)
        dc = dc + dc_new * f

        dW_f += dzf @ full.T
        dW_i += dzi @ full.T
        dW_o += dzo @ full.T
        dW_g += dzg @ hx.T
        db_f += dzf.sum(axis=1)
        db_i += dzi.sum(axis=1)
        db_o += dzo.sum(axis=1)
        db_g += dzg.sum(axis=1)

        d_full = params.W_f.T @ dzf + params.W_i.T @ dzi + params.W_o.T @ dzo
        d_hx = params.W_g.T @ dzg
        if params.peephole:
            dc = dc + d_full[:H]
            d_hx = d_hx + d_full[H:]
        else:
            d_hx = d_hx + d_full
        dh = dh + d_hx[:H]
        dX[t] = d_hx[H:]
    return LstmParams(*grads, peephole=params.peephole), dX


def lstm_forward(params, sequence):
    """Run one ``(T, d)`` sequence; returns ``(final_h, all_h (T, H), cache)``."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise DimensionError("sequence must be a non-empty (T, d) array")
    Y, cache = lstm_run(params, seq[:, :, None])
    return Y[-1, :, 0], Y[:, :, 0], cache


def lstm_backward(params, cache, d_final=None, d_all=None, window=None):
    """Gradients for :func:`lstm_forward` given upstream gradients on the final and/or every output."""
    T = cache["X"].shape[0]
    dY = np.zeros((T, params.hidden_size, 1))
    if d_all is not None:
        dY[:, :, 0] += d_all
    if d_final is not None:
        dY[-1, :, 0] += d_final
    grads, dX = lstm_run_backward(params, cache, dY, window)
    return grads, dX[:, :, 0]


# ------------------------------------------------------- bidirectional LSTM


@dataclass
class BiLstmParams:
    """Forward and backward cells combined as ``W_fwd h_fwd + W_bwd h_bwd + b``."""

    forward: LstmParams
    backward: LstmParams
    W_fwd: np.ndarray
    W_bwd: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.forward.input_size != self.backward.input_size:
            raise DimensionError("forward and backward cells must read the same input")
        out = self.b.shape[0]
        if self.W_fwd.shape != (out, self.forward.hidden_size) or self.W_bwd.shape != (out, self.backward.hidden_size):
            raise DimensionError("combination matrices do not match the cells' hidden sizes")

    @property
    def input_size(self):
        return self.forward.input_size

    @property
    def output_size(self):
        return self.b.shape[0]

    def tensors(self):
        return self.forward.tensors() + self.backward.tensors() + [self.W_fwd, self.W_bwd, self.b]


def bilstm_run(params, X, mask=None):
    Yf, cf = lstm_run(params.forward, X, mask)
    Yb, cb = lstm_run(params.backward, X, mask, reverse=True)
    m = cf["mask"]
    out = m * (np.einsum("oh,thb->tob", params.W_fwd, Yf) + np.einsum("oh,thb->tob", params.W_bwd, Yb)
               + params.b[None, :, None])
    return out, {"fwd": cf, "bwd": cb, "Yf": Yf, "Yb": Yb, "mask": m}


def bilstm_run_backward(params, cache, dOut, window=None):
    d = cache["mask"] * dOut
    dW_fwd = np.einsum("tob,thb->oh", d, cache["Yf"])
    dW_bwd = np.einsum("tob,thb->oh", d, cache["Yb"])
    db = d.sum(axis=(0, 2))
    gf, dXf = lstm_run_backward(params.forward, cache["fwd"], np.einsum("oh,tob->thb", params.W_fwd, d), window)
    gb, dXb = lstm_run_backward(params.backward, cache["bwd"], np.einsum("oh,tob->thb", params.W_bwd, d), window)
    return BiLstmParams(gf, gb, dW_fwd, dW_bwd, db), dXf + dXb


def bilstm_forward(params, sequence):
    """Per-step outputs ``(T, out)`` for one ``(T, d)`` sequence, plus the cache."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise DimensionError("sequence must be a non-empty (T, d) array")
    out, cache = bilstm_run(params, seq[:, :, None])
    return out[:, :, 0], cache


def bilstm_backward(params, cache, d_out):
    grads, dX = bilstm_run_backward(params, cache, np.asarray(d_out, dtype=float)[:, :, None])
    return grads, dX[:, :, 0]


# ------------------------------------------------------------- deep stacks


@dataclass
class DeepLstm:
    """Stacked recurrent layers; layer ``l`` reads every output of layer ``l - 1``.

    The representation of a sequence is the top layer's output at the last step.
    """

    layers: list

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("a deep LSTM needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.input_size != prev.output_size:
                raise DimensionError("consecutive LSTM layer sizes do not chain")

    @property
    def input_size(self):
        return self.layers[0].input_size

    @property
    def output_size(self):
        return self.layers[-1].output_size

    def tensors(self):
        return [t for layer in self.layers for t in layer.tensors()]


def _run_layer(layer, X, mask):
    if isinstance(layer, BiLstmParams):
        return bilstm_run(layer, X, mask)
    return lstm_run(layer, X, mask)


def _run_layer_backward(layer, cache, dY, window):
    if isinstance(layer, BiLstmParams):
        return bilstm_run_backward(layer, cache, dY, window)
    return lstm_run_backward(layer, cache, dY, window)


def deep_lstm_forward(stack, X, mask=None):
    """Final-step representations ``(o, B)`` of a left-padded batch ``X (T, D, B)``."""
    caches = []
    Y = X
    for layer in stack.layers:
        Y, cache = _run_layer(layer, Y, mask)
        caches.append(cache)
    return Y[-1], {"caches": caches, "T": X.shape[0]}


def deep_lstm_backward(stack, cache, d_final, window=None):
    """Gradients of the stack given ``d_final (o, B)`` on the final-step output."""
    T = cache["T"]
    dY = np.zeros((T,) + d_final.shape)
    dY[-1] = d_final
    grads = []
    for layer, layer_cache in zip(stack.layers[::-1], cache["caches"][::-1]):
        g, dY = _run_layer_backward(layer, layer_cache, dY, window)
        grads.append(g)
    return DeepLstm(grads[::-1]), dY


def pack_sequences(sequences):
    """Left-pad a list of ``(T_i, d)`` arrays into ``X (T_max, d, B)`` and a ``(T_max, B)`` mask."""
    if not sequences:
        raise DimensionError("no sequences to pack")
    lengths = [len(s) for s in sequences]
    if min(lengths) < 1:
        raise DimensionError("empty sequence")
    d = np.asarray(sequences[0]).shape[1]
    T = max(lengths)
    X = np.zeros((T, d, len(sequences)))
    mask = np.zeros((T, len(sequences)))
    for b, seq in enumerate(sequences):
        L = lengths[b]
        X[T - L:, :, b] = seq
        mask[T - L:, b] = 1.0
    return X, mask


# --------------------------------------------------------- split autoencoder


@dataclass
class SplitAeModel:
    """Two-view autoencoder.

    ``architecture == "pair"``: each view has its own encoder; both feed one
    shared layer ``act(shared_Wx a_x + shared_b)`` / ``act(shared_Wy a_y + shared_b)``
    with a common bias. Each view is decoded from its own shared code.

    ``architecture == "single"``: ``encoder_x`` alone produces the shared code
    from which both views are decoded.
    """

    architecture: str
    encoder_x: MlpParams
    decoder_x: MlpParams
    decoder_y: MlpParams
    encoder_y: MlpParams | None = None
    shared_Wx: np.ndarray | None = None
    shared_Wy: np.ndarray | None = None
    shared_b: np.ndarray | None = None
    shared_activation: str = "sigmoid"

    def __post_init__(self):
        if self.architecture not in ("pair", "single"):
            raise ValueError("architecture must be 'pair' or 'single'")
        if self.architecture == "pair":
            if self.encoder_y is None or self.shared_Wx is None or self.shared_Wy is None or self.shared_b is None:
                raise ValueError("the pair architecture needs encoder_y and the shared layer")
            s = self.shared_b.shape[0]
            if self.shared_Wx.shape[0] != s or self.shared_Wy.shape[0] != s:
                raise DimensionError("shared layer weights disagree on the representation size")
        code = self.code_size
        if self.decoder_x.input_size not in (None, code) or self.decoder_y.input_size not in (None, code):
            raise DimensionError("decoders must read the shared representation")

    @property
    def code_size(self):
        if self.architecture == "pair":
            return self.shared_b.shape[0]
        return self.encoder_x.output_size

    def tensors(self):
        out = self.encoder_x.tensors()
        if self.architecture == "pair":
            out += self.encoder_y.tensors() + [self.shared_Wx, self.shared_Wy, self.shared_b]
        return out + self.decoder_x.tensors() + self.decoder_y.tensors()


def _encoder(model, view):
    if model.architecture == "single":
        if view != 1:
            raise ValueError("the single-view architecture only encodes view 1")
        return model.encoder_x
    enc, W = (model.encoder_x, model.shared_Wx) if view == 1 else (model.encoder_y, model.shared_Wy)
    return MlpParams(enc.layers + [Dense(W, model.shared_b, model.shared_activation)])


def splitae_encode(model, Z, view=1):
    """Shared representation of ``Z (d, n)`` computed from one view."""
    return mlp_forward(_encoder(model, view), Z)[0]


def splitae_loss(model, X, Y):
    """Reconstruction loss ``1/2 sum_i (||x_i - x_hat_i||^2 + ||y_i - y_hat_i||^2)`` and its gradients."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise DimensionError("views must be (d, n) with equal n")
    enc_x = _encoder(model, 1)
    hx, cache_hx = mlp_forward(enc_x, X)
    x_hat, cache_dx = mlp_forward(model.decoder_x, hx)
    if model.architecture == "pair":
        enc_y = _encoder(model, 2)
        hy, cache_hy = mlp_forward(enc_y, Y)
    else:
        hy = hx
    y_hat, cache_dy = mlp_forward(model.decoder_y, hy)
    if x_hat.shape != X.shape or y_hat.shape != Y.shape:
        raise DimensionError("decoder outputs do not match the input views")

    rx, ry = x_hat - X, y_hat - Y
    loss = 0.5 * float(np.sum(rx * rx) + np.sum(ry * ry))

    g_dec_x, d_hx = mlp_backward(model.decoder_x, cache_dx, rx)
    g_dec_y, d_hy = mlp_backward(model.decoder_y, cache_dy, ry)
    if model.architecture == "single":
        g_enc_x, _ = mlp_backward(enc_x, cache_hx, d_hx + d_hy)
        grads = SplitAeModel("single", g_enc_x, g_dec_x, g_dec_y)
    else:
        g_ex, _ = mlp_backward(enc_x, cache_hx, d_hx)
        g_ey, _ = mlp_backward(enc_y, cache_hy, d_hy)
        sx, sy = g_ex.layers[-1], g_ey.layers[-1]
        grads = SplitAeModel(
            "pair", MlpParams(g_ex.layers[:-1]), g_dec_x, g_dec_y, MlpParams(g_ey.layers[:-1]),
            sx.W, sy.W, sx.b + sy.b, model.shared_activation,
        )
    return loss, grads
