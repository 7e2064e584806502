"""scikit-learn style estimators over the functional core.

Estimators take ``(n_samples, n_features)`` arrays like the rest of the
scikit-learn ecosystem and transpose internally to the column-as-sample
convention used by :mod:`mvcorr.cca`, :mod:`mvcorr.corr` and friends.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cca import cca_transform, fit_cca
from .corr import CorrConfig
from .data import SequenceDataset, Utterance
from .kcca import KernelSpec, fit_kcca, kcca_transform
from .nn import deep_lstm_forward, mlp_forward, pack_sequences, splitae_encode
from .train import (
    TrainConfig,
    build_deep_lstm,
    build_mlp,
    build_splitae,
    train_dcca,
    train_dcclstm,
    train_splitae,
)

_CHUNK = 4096


def _check_views(X, Y=None):
    X = check_array(X, dtype=np.float64)
    if Y is None:
        return X, None
    Y = check_array(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X and Y have different numbers of samples: {X.shape[0]} vs {Y.shape[0]}")
    return X, Y


def _both(self, X, Y, project):
    check_is_fitted(self)
    X, Y = _check_views(X, Y)
    Xt = project(X.T, 1).T
    if Y is None:
        return Xt
    return Xt, project(Y.T, 2).T


class CCA(BaseEstimator, TransformerMixin):
    """Regularized linear CCA.

    Parameters
    ----------
    n_components : int
        Number of canonical pairs.
    reg_x, reg_y : float
        Ridge added to each view's covariance before whitening.
    """

    def __init__(self, n_components=2, reg_x=0.0, reg_y=0.0):
        self.n_components = n_components
        self.reg_x = reg_x
        self.reg_y = reg_y

    def fit(self, X, Y):
        X, Y = _check_views(X, Y)
        self.model_ = fit_cca(X.T, Y.T, self.n_components, self.reg_x, self.reg_y)
        self.canonical_correlations_ = self.model_.corrs
        return self

    def transform(self, X, Y=None):
        return _both(self, X, Y, lambda Z, v: cca_transform(self.model_, Z, v))

    def fit_transform(self, X, Y=None, **fit_params):
        return self.fit(X, Y).transform(X, Y)


class KernelCCA(BaseEstimator, TransformerMixin):
    """Kernel CCA with an exact dual solve (keep ``n_samples`` in the low thousands)."""

    def __init__(self, n_components=2, kernel_x="gaussian", kernel_y="gaussian", degree=2, offset=1.0,
                 bandwidth_x=None, bandwidth_y=None, reg_x=None, reg_y=None):
        self.n_components = n_components
        self.kernel_x = kernel_x
        self.kernel_y = kernel_y
        self.degree = degree
        self.offset = offset
        self.bandwidth_x = bandwidth_x
        self.bandwidth_y = bandwidth_y
        self.reg_x = reg_x
        self.reg_y = reg_y

    def fit(self, X, Y):
        X, Y = _check_views(X, Y)
        kx = KernelSpec(self.kernel_x, self.degree, self.offset, self.bandwidth_x)
        ky = KernelSpec(self.kernel_y, self.degree, self.offset, self.bandwidth_y)
        self.model_ = fit_kcca(X.T, Y.T, self.n_components, self.reg_x, self.reg_y, kx, ky)
        self.canonical_correlations_ = self.model_.corrs
        return self

    def transform(self, X, Y=None):
        return _both(self, X, Y, lambda Z, v: kcca_transform(self.model_, Z, v))

    def fit_transform(self, X, Y=None, **fit_params):
        return self.fit(X, Y).transform(X, Y)


def _train_config(est, **overrides):
    fields = dict(
        batch_size=est.batch_size, epochs=est.epochs, learning_rate=est.learning_rate,
        optimizer=est.optimizer, clip_threshold=est.clip_threshold, init=est.init, seed=est.seed,
    )
    fields.update(overrides)
    return TrainConfig(**fields)


class DCCA(BaseEstimator, TransformerMixin):
    """Deep CCA with two feed-forward networks.

    After training, linear CCA is fitted on the network outputs so that
    ``transform`` returns ``n_components`` canonical projections.
    """

    def __init__(self, hidden_sizes=(64,), output_size=10, n_components=None, activation="sigmoid",
                 output_activation="identity", reg=1e-4, batch_size=200, epochs=10, learning_rate=1e-3,
                 optimizer="adam", clip_threshold=None, init="uniform", seed=0):
        self.hidden_sizes = hidden_sizes
        self.output_size = output_size
        self.n_components = n_components
        self.activation = activation
        self.output_activation = output_activation
        self.reg = reg
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.clip_threshold = clip_threshold
        self.init = init
        self.seed = seed

    def _net(self, d_in, rng):
        sizes = [d_in] + list(self.hidden_sizes) + [self.output_size]
        acts = [self.activation] * len(self.hidden_sizes) + [self.output_activation]
        return build_mlp(sizes, acts, self.init, rng)

    def fit(self, X, Y):
        X, Y = _check_views(X, Y)
        rng = np.random.default_rng(self.seed)
        corr_cfg = CorrConfig(self.reg, self.reg)
        self.net_x_, self.net_y_, self.history_ = train_dcca(
            self._net(X.shape[1], rng), self._net(Y.shape[1], rng), X.T, Y.T,
            _train_config(self), corr_cfg,
        )
        F, G = self.outputs(X, Y)
        self.cca_ = fit_cca(F.T, G.T, self.n_components or self.output_size, self.reg, self.reg)
        return self

    def outputs(self, X, Y=None):
        """Raw network outputs before the final linear CCA."""
        check_is_fitted(self, "net_x_")
        X, Y = _check_views(X, Y)
        F = mlp_forward(self.net_x_, X.T)[0].T
        return F if Y is None else (F, mlp_forward(self.net_y_, Y.T)[0].T)

    def transform(self, X, Y=None):
        check_is_fitted(self, "cca_")
        nets = {1: self.net_x_, 2: self.net_y_}
        return _both(self, X, Y, lambda Z, v: cca_transform(self.cca_, mlp_forward(nets[v], Z)[0], v))

    def fit_transform(self, X, Y=None, **fit_params):
        return self.fit(X, Y).transform(X, Y)


class SplitAE(BaseEstimator, TransformerMixin):
    """Split autoencoder; ``transform`` returns the shared code computed from view 1."""

    def __init__(self, architecture="single", hidden_sizes=(64,), code_size=10, activation="sigmoid",
                 batch_size=200, epochs=10, learning_rate=1e-3, optimizer="adam", clip_threshold=None,
                 init="uniform", seed=0):
        self.architecture = architecture
        self.hidden_sizes = hidden_sizes
        self.code_size = code_size
        self.activation = activation
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.clip_threshold = clip_threshold
        self.init = init
        self.seed = seed

    def fit(self, X, Y):
        X, Y = _check_views(X, Y)
        model = build_splitae(self.architecture, X.shape[1], Y.shape[1], self.hidden_sizes, self.code_size,
                              self.activation, self.init, np.random.default_rng(self.seed))
        self.model_, self.history_ = train_splitae(model, X.T, Y.T, _train_config(self))
        return self

    def transform(self, X, Y=None):
        check_is_fitted(self, "model_")
        X, _ = _check_views(X)
        return splitae_encode(self.model_, X.T, 1).T


def lstm_frame_features(stack, views, window):
    """Representation of every frame: the stack's output after reading the last ``window`` frames.

    ``views`` is a list of ``(T, d)`` arrays (one per utterance); frames near
    the start of an utterance see a shorter, left-padded history. Returns an
    ``(o, total_frames)`` matrix.
    """
    cols = []
    for view in views:
        T, d = view.shape
        padded = np.zeros((T + window - 1, d))
        padded[window - 1:] = view
        for start in range(0, T, _CHUNK):
            t = np.arange(start, min(T, start + _CHUNK))
            X = np.stack([padded[t + k] for k in range(window)]).transpose(0, 2, 1)
            mask = (t[None, :] + np.arange(window)[:, None] >= window - 1).astype(float)
            cols.append(deep_lstm_forward(stack, X, mask)[0])
    return np.concatenate(cols, axis=1)


class DCCLSTM(BaseEstimator, TransformerMixin):
    """Deep canonically correlated LSTMs on aligned variable-length sequences.

    ``fit`` takes two lists of aligned ``(T_i, d)`` arrays (utterances);
    ``transform`` maps a list of sequences to their final-step
    representations, one row per sequence.
    """

    def __init__(self, hidden_sizes=(32,), peephole=True, bidirectional=False, reg=1e-4, batch_size=32,
                 epochs=10, learning_rate=1e-3, optimizer="adam", clip_threshold=1.0, seq_len_range=(10, 20),
                 tbptt_window=None, init="uniform", steps_per_epoch=None, seed=0):
        self.hidden_sizes = hidden_sizes
        self.peephole = peephole
        self.bidirectional = bidirectional
        self.reg = reg
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.clip_threshold = clip_threshold
        self.seq_len_range = seq_len_range
        self.tbptt_window = tbptt_window
        self.init = init
        self.steps_per_epoch = steps_per_epoch
        self.seed = seed

    def fit(self, X, Y):
        if len(X) != len(Y):
            raise ValueError("X and Y must hold the same number of sequences")
        dataset = SequenceDataset([Utterance(np.asarray(x), np.asarray(y)) for x, y in zip(X, Y)])
        rng = np.random.default_rng(self.seed)
        build = lambda d: build_deep_lstm(d, list(self.hidden_sizes), self.peephole, self.bidirectional,
                                          self.init, rng)
        cfg = _train_config(self, seq_len_range=tuple(self.seq_len_range), tbptt_window=self.tbptt_window,
                            steps_per_epoch=self.steps_per_epoch)
        self.stack_x_, self.stack_y_, self.history_ = train_dcclstm(
            build(dataset.d1), build(dataset.d2), dataset, cfg, CorrConfig(self.reg, self.reg),
        )
        return self

    def transform(self, X, Y=None):
        check_is_fitted(self, "stack_x_")

        def run(stack, seqs):
            Xp, mask = pack_sequences([np.asarray(s, dtype=float) for s in seqs])
            return deep_lstm_forward(stack, Xp, mask)[0].T

        F = run(self.stack_x_, X)
        return F if Y is None else (F, run(self.stack_y_, Y))
