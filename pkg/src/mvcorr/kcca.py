"""Kernel CCA with an exact, regularized dual solve.

Memory is O(n^2) and time O(n^3) in the number of training samples, and the
fitted model retains both training views; keep ``n`` in the low thousands.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .exceptions import DimensionError
from .validation import check_pair, check_view

KERNELS = ("linear", "polynomial", "gaussian")
_CHUNK = 4096


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    degree: int = 2
    offset: float = 1.0
    bandwidth: float | None = None  # gaussian only; None -> median heuristic at fit time

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError("polynomial degree must be a positive integer")
        if self.kind == "gaussian" and self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("gaussian bandwidth must be positive")


@dataclass(frozen=True)
class GramCentering:
    """Training statistics needed to center cross-Gram matrices consistently."""

    row_means: np.ndarray
    grand_mean: float


@dataclass(frozen=True)
class KccaModel:
    alpha: np.ndarray
    beta: np.ndarray
    X_train: np.ndarray
    Y_train: np.ndarray
    kernel_x: KernelSpec
    kernel_y: KernelSpec
    r_x: float
    r_y: float
    centering_x: GramCentering
    centering_y: GramCentering
    corrs: np.ndarray

    @property
    def k(self):
        return self.alpha.shape[1]

    @property
    def scale(self):
        # alpha satisfies alpha^T K^2 alpha = I; sqrt(n-1) restores unit sample variance
        return np.sqrt(self.X_train.shape[1] - 1)


def kernel_eval(spec, a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"vector lengths differ: {a.size} vs {b.size}")
    return float(gram(spec, a[:, None], b[:, None])[0, 0])


def gram(spec, A, B):
    """Kernel matrix with entry ``(i, j) = kappa(A[:, i], B[:, j])``."""
    A = check_view(A, "A")
    B = check_view(B, "B")
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"feature dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    if spec.kind == "linear":
        return A.T @ B
    if spec.kind == "polynomial":
        return (A.T @ B + spec.offset) ** int(spec.degree)
    if spec.bandwidth is None:
        raise ValueError("gaussian kernel needs a bandwidth; resolve it with resolve_kernel")
    d2 = cdist(A.T, B.T, "sqeuclidean")
    return np.exp(-d2 / (2.0 * spec.bandwidth**2))


def resolve_kernel(spec, X):
    """Fill in a missing gaussian bandwidth with the median pairwise distance of ``X``."""
    if spec.kind != "gaussian" or spec.bandwidth is not None:
        return spec
    d = pdist(X.T)
    d = d[d > 0]
    return replace(spec, bandwidth=float(np.median(d)) if d.size else 1.0)


def center_gram(K):
    """Double-center a square training Gram matrix: ``H K H`` with ``H = I - 11^T/n``."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f"expected a square Gram matrix, got {K.shape}")
    row_means = K.mean(axis=1)
    grand = float(row_means.mean())
    Kc = K - row_means[:, None] - row_means[None, :] + grand
    return 0.5 * (Kc + Kc.T), GramCentering(row_means, grand)


def center_gram_test(K_cross, stats):
    """Center a cross-Gram ``(n_train, m)`` with the training statistics.

    Equivalent to centering the test points in feature space with the
    training mean.
    """
    K_cross = np.asarray(K_cross, dtype=float)
    if K_cross.ndim != 2 or K_cross.shape[0] != stats.row_means.shape[0]:
        raise DimensionError(
            f"cross-Gram has {K_cross.shape[0] if K_cross.ndim == 2 else '?'} rows, "
            f"training set has {stats.row_means.shape[0]}"
        )
    return K_cross - stats.row_means[:, None] - K_cross.mean(axis=0)[None, :] + stats.grand_mean


def default_regularizer(Kc):
    return 1e-3 * float(np.trace(Kc)) / Kc.shape[0]


def _spectral_factors(Kc, r):
    """Return ``(A, M)``: ``A = K^{1/2}(K + rI)^{-1/2}`` and ``M = (K^2 + rK)^{+1/2}``."""
    w, Q = np.linalg.eigh(Kc)
    w = np.clip(w, 0.0, None)
    tol = 1e-10 * max(w[-1], 1e-300)
    pos = w > tol
    a = np.sqrt(w / (w + r))
    m = np.zeros_like(w)
    m[pos] = 1.0 / np.sqrt(w[pos] * (w[pos] + r))
    A = (Q * a) @ Q.T
    return 0.5 * (A + A.T), (Q * m) @ Q.T


def fit_kcca(X, Y, k, r_x=None, r_y=None, kernel_x=None, kernel_y=None):
    """Fit kernel CCA to views ``X (d_x, n)`` and ``Y (d_y, n)``.

    The dual coefficients satisfy ``alpha^T (K_x^2 + r_x K_x) alpha = I`` on the
    centered Gram matrices. The problem is solved through the SVD of the
    symmetric matrix ``A_x A_y`` with ``A = K^{1/2} (K + rI)^{-1/2}``, whose
    squared singular values are the eigenvalues of
    ``(K_x + r_x I)^{-1} K_y (K_y + r_y I)^{-1} K_x``. Regularizers default to
    ``1e-3 * trace(K) / n``.
    """
    X, Y = check_pair(X, Y)
    n = X.shape[1]
    if n < 2:
        raise DimensionError("KCCA needs at least two samples")
    if k < 1 or k > n:
        raise DimensionError(f"k={k} must lie in [1, n={n}]")
    kernel_x = resolve_kernel(kernel_x or KernelSpec(), X)
    kernel_y = resolve_kernel(kernel_y or KernelSpec(), Y)

    Kx, stats_x = center_gram(gram(kernel_x, X, X))
    Ky, stats_y = center_gram(gram(kernel_y, Y, Y))
    r_x = default_regularizer(Kx) if r_x is None else float(r_x)
    r_y = default_regularizer(Ky) if r_y is None else float(r_y)
    if r_x <= 0 or r_y <= 0:
        raise ValueError("KCCA regularizers must be positive (centered Gram matrices are singular)")

    Ax, Mx = _spectral_factors(Kx, r_x)
    Ay, My = _spectral_factors(Ky, r_y)
    P, s, Qt = np.linalg.svd(Ax @ Ay)
    alpha = Mx @ P[:, :k]
    beta = My @ Qt.T[:, :k]

    idx = np.argmax(np.abs(alpha), axis=0)
    signs = np.where(alpha[idx, np.arange(k)] < 0, -1.0, 1.0)
    return KccaModel(
        alpha * signs, beta * signs, X.copy(), Y.copy(), kernel_x, kernel_y,
        r_x, r_y, stats_x, stats_y, s[:k].copy(),
    )


def kcca_transform(model, Z, view=1):
    """Project ``Z (d, m)`` onto the ``k`` kernel canonical directions of a view."""
    Z = check_view(Z, "Z")
    if view == 1:
        train, spec, coef, stats = model.X_train, model.kernel_x, model.alpha, model.centering_x
    elif view == 2:
        train, spec, coef, stats = model.Y_train, model.kernel_y, model.beta, model.centering_y
    else:
        raise ValueError("view must be 1 or 2")
    if Z.shape[0] != train.shape[0]:
        raise DimensionError(f"view {view} expects {train.shape[0]} features, got {Z.shape[0]}")
    out = np.empty((coef.shape[1], Z.shape[1]))
    for start in range(0, Z.shape[1], _CHUNK):
        block = Z[:, start:start + _CHUNK]
        Kc = center_gram_test(gram(spec, train, block), stats)
        out[:, start:start + _CHUNK] = model.scale * (coef.T @ Kc)
    return out
