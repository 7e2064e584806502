"""Linear canonical correlation analysis on two views."""
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, SingularCovarianceError
from .linalg import center_columns, covariance, inv_sqrt_psd, sym_eig
from .validation import check_pair, check_view


@dataclass(frozen=True)
class CcaModel:
    """Fitted CCA projections.

    ``U`` is ``(d_x, k)`` and ``V`` is ``(d_y, k)``; a view is projected as
    ``U.T @ (x - mean_x)``. ``corrs`` holds the canonical correlations in
    descending order.
    """

    U: np.ndarray
    V: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    corrs: np.ndarray
    r_x: float
    r_y: float

    @property
    def k(self):
        return self.U.shape[1]


def _whitener(C, reg, view):
    w = sym_eig(C).eigenvalues
    if reg == 0 and w[-1] <= 1e-12 * max(w[0], 1e-300):
        raise SingularCovarianceError(
            f"covariance of view {view} is singular; use a positive regularizer"
        )
    return inv_sqrt_psd(C)


def fit_cca(X, Y, k, r_x=0.0, r_y=0.0):
    """Fit linear CCA with ``k`` components to views ``X (d_x, n)`` and ``Y (d_y, n)``.

    Solved through the SVD of ``(C_xx + r_x I)^{-1/2} C_xy (C_yy + r_y I)^{-1/2}``.
    Covariances use the unbiased ``n - 1`` denominator.
    """
    X, Y = check_pair(X, Y)
    n = X.shape[1]
    if n < 2:
        raise DimensionError("CCA needs at least two samples")
    if k < 1 or k > min(X.shape[0], Y.shape[0]):
        raise DimensionError(f"k={k} must lie in [1, min(d_x, d_y)={min(X.shape[0], Y.shape[0])}]")
    if r_x < 0 or r_y < 0:
        raise ValueError("regularizers must be non-negative")

    Xc, mean_x = center_columns(X)
    Yc, mean_y = center_columns(Y)
    Wx = _whitener(covariance(Xc, Xc, r_x), r_x, 1)
    Wy = _whitener(covariance(Yc, Yc, r_y), r_y, 2)
    T = Wx @ covariance(Xc, Yc) @ Wy
    P, s, Qt = np.linalg.svd(T)
    U = Wx @ P[:, :k]
    V = Wy @ Qt.T[:, :k]

    # deterministic signs: largest-magnitude entry of each u_i is positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[idx, np.arange(k)] < 0, -1.0, 1.0)
    return CcaModel(U * signs, V * signs, mean_x, mean_y, s[:k].copy(), float(r_x), float(r_y))


def cca_transform(model, Z, view=1):
    """Project samples ``Z (d, m)`` of view 1 or 2 onto the ``k`` canonical directions."""
    Z = check_view(Z, "Z")
    if view == 1:
        W, mean = model.U, model.mean_x
    elif view == 2:
        W, mean = model.V, model.mean_y
    else:
        raise ValueError("view must be 1 or 2")
    if Z.shape[0] != W.shape[0]:
        raise DimensionError(f"view {view} expects {W.shape[0]} features, got {Z.shape[0]}")
    return W.T @ (Z - mean[:, None])


def cca_reconstruction_objective(model, X, Y):
    """Mean squared distance between the projected, centered views.

    Each view is centered with its own sample mean and the average uses the
    ``n - 1`` denominator, so for a fitted model with zero regularization the
    value equals ``2k - 2 * sum(corrs)``.
    """
    X, Y = check_pair(X, Y, min_samples=2)
    if X.shape[0] != model.U.shape[0] or Y.shape[0] != model.V.shape[0]:
        raise DimensionError("data dimensions do not match the model")
    Xc, _ = center_columns(X)
    Yc, _ = center_columns(Y)
    D = model.U.T @ Xc - model.V.T @ Yc
    return float(np.sum(D * D) / (X.shape[1] - 1))
