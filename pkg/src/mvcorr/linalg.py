"""Dense linear algebra used by the correlation methods.

Matrices follow the column-as-sample convention: a data matrix of shape
``(d, n)`` holds ``n`` samples of dimension ``d``.
"""
from typing import NamedTuple

import numpy as np

from .exceptions import DimensionError, NotPSDError, NotSymmetricError

EIG_FLOOR = 1e-10


class SymEig(NamedTuple):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {A.shape}")
    return A


def sym_eig(A, tol=1e-10):
    """Eigendecomposition ``A = Q diag(w) Q^T`` with ``w`` sorted descending.

    ``A`` must be symmetric to within ``tol`` relative to its largest entry;
    it is symmetrized before the solve to remove accumulated asymmetry.
    """
    A = _check_square(A)
    scale = max(np.max(np.abs(A)), 1.0)
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise NotSymmetricError("matrix is not symmetric")
    w, Q = np.linalg.eigh(0.5 * (A + A.T))
    return SymEig(w[::-1].copy(), Q[:, ::-1].copy())


def inv_sqrt_psd(A, eps=EIG_FLOOR):
    """Inverse square root of a symmetric PSD matrix.

    Eigenvalues below ``eps`` are clamped to ``eps``; an eigenvalue below
    ``-eps`` is treated as a genuine failure of positive semi-definiteness.
    """
    w, Q = sym_eig(A)
    if w[-1] < -eps:
        raise NotPSDError(f"smallest eigenvalue {w[-1]:.3e} is below -{eps:g}")
    out = (Q * np.maximum(w, eps) ** -0.5) @ Q.T
    return 0.5 * (out + out.T)


def center_columns(X):
    """Subtract the per-row mean; returns ``(Xc, mean)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionError(f"expected a (d, n) matrix with n >= 1, got {X.shape}")
    mean = X.mean(axis=1)
    return X - mean[:, None], mean


def covariance(Xc, Yc, reg=0.0, denom=None):
    """``Xc Yc^T / denom``, plus ``reg * I`` when both arguments are the same view.

    ``denom`` defaults to ``n - 1``. Auto-covariances are symmetrized exactly.
    """
    Xc = np.asarray(Xc, dtype=float)
    Yc = np.asarray(Yc, dtype=float)
    if Xc.ndim != 2 or Yc.ndim != 2 or Xc.shape[1] != Yc.shape[1]:
        raise DimensionError(f"sample counts differ: {Xc.shape} vs {Yc.shape}")
    if denom is None:
        denom = Xc.shape[1] - 1
    C = Xc @ Yc.T / denom
    if Yc is Xc or (Xc.shape == Yc.shape and np.array_equal(Xc, Yc)):
        C = 0.5 * (C + C.T)
        C[np.diag_indices_from(C)] += reg
    return C
