"""Minibatch canonical-correlation objective used to train deep CCA models.

For network outputs ``F`` and ``G`` (each ``o x m``) the objective is the sum
of singular values of ``T = S11^{-1/2} S12 S22^{-1/2}``, built from the
centered, regularized batch covariances. Training minimizes ``-corr``.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .linalg import EIG_FLOOR, center_columns, covariance, inv_sqrt_psd


@dataclass(frozen=True)
class CorrConfig:
    r_x: float = 1e-4
    r_y: float = 1e-4
    k: int | None = None  # None means all output dimensions
    eig_floor: float = EIG_FLOOR

    def __post_init__(self):
        if self.r_x <= 0 or self.r_y <= 0:
            raise ValueError("correlation regularizers must be positive")


@dataclass(frozen=True)
class CorrResult:
    corr: float
    singular_values: np.ndarray
    grad_F: np.ndarray
    grad_G: np.ndarray


def _check_outputs(F, G):
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    if F.ndim != 2 or G.ndim != 2 or F.shape[1] != G.shape[1]:
        raise DimensionError(f"outputs must be (o, m) with equal m, got {F.shape} and {G.shape}")
    if F.shape[1] < 2:
        raise DimensionError("correlation needs a batch of at least two samples")
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(G))):
        raise ValueError("network outputs contain NaN or Inf")
    return F, G


def _whitened(F, G, cfg):
    Fc, _ = center_columns(F)
    Gc, _ = center_columns(G)
    W11 = inv_sqrt_psd(covariance(Fc, Fc, cfg.r_x), cfg.eig_floor)
    W22 = inv_sqrt_psd(covariance(Gc, Gc, cfg.r_y), cfg.eig_floor)
    T = W11 @ covariance(Fc, Gc) @ W22
    return Fc, Gc, W11, W22, T


def corr_objective(F, G, cfg=None):
    """Total batch correlation of ``F`` and ``G`` and its gradient.

    With ``T = P diag(s) Q^T``::

        D12 = S11^{-1/2} P Q^T S22^{-1/2}
        D11 = -1/2 S11^{-1/2} P diag(s) P^T S11^{-1/2}
        dcorr/dF = (2 D11 Fc + D12 Gc) / (m - 1)

    and symmetrically for ``G``.
    """
    cfg = cfg or CorrConfig()
    F, G = _check_outputs(F, G)
    if F.shape[0] != G.shape[0]:
        raise DimensionError("both networks must have the same output dimension")
    o, m = F.shape
    if cfg.k is not None and cfg.k != o:
        raise ValueError(f"the trace-norm objective requires k == o ({cfg.k} != {o})")

    Fc, Gc, W11, W22, T = _whitened(F, G, cfg)
    P, s, Qt = np.linalg.svd(T)
    D12 = W11 @ P @ Qt @ W22
    D11 = -0.5 * W11 @ (P * s) @ P.T @ W11
    D22 = -0.5 * W22 @ (Qt.T * s) @ Qt @ W22
    grad_F = (2.0 * D11 @ Fc + D12 @ Gc) / (m - 1)
    grad_G = (2.0 * D22 @ Gc + D12.T @ Fc) / (m - 1)
    return CorrResult(float(s.sum()), s, grad_F, grad_G)


def corr_captured(F, G, cfg=None, k_report=None):
    """Return ``(total, top_k)``: the sum of all singular values of ``T`` and of the largest ``k_report``.

    Views may have different dimensions.
    """
    cfg = cfg or CorrConfig()
    F, G = _check_outputs(F, G)
    s = np.linalg.svd(_whitened(F, G, cfg)[-1], compute_uv=False)
    if k_report is None:
        k_report = s.size
    if k_report < 0 or k_report > min(F.shape[0], G.shape[0]):
        raise ValueError(f"k_report={k_report} exceeds the number of components {s.size}")
    return float(s.sum()), float(s[:k_report].sum())
