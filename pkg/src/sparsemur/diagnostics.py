"""Stationarity, sparsity and majorization diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ShapeMismatchError
from .matcore import check_nonneg
from .priors import neg_log_prior, penalty_gradient, weight_matrix

DEFAULT_SUPPORT_THRESHOLD = 1e-6


@dataclass
class KktReport:
    """KKT residual of the constrained MAP problem at a point ``H``.

    Attributes
    ----------
    residual_matrix : ndarray
        ``min(H, W^T W H - W^T X + lam * P(H))`` entry-wise, ``P`` being the
        penalty gradient of the prior.
    normalized_norm : float
        Mean absolute value of ``residual_matrix``.
    condition_flags : dict
        ``tau_lambda_condition`` is True/False when the tau <= lam / max(W^T X)
        condition for z=1 priors holds / fails, and None when it does not
        apply (z=2 priors, where the requirement is tau -> 0, or no prior).
    """

    residual_matrix: np.ndarray
    normalized_norm: float
    condition_flags: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "normalized_norm": float(self.normalized_norm),
            "max_abs": float(np.max(np.abs(self.residual_matrix))) if self.residual_matrix.size else 0.0,
            "shape": list(self.residual_matrix.shape),
            "condition_flags": dict(self.condition_flags),
        }


def _shapes(X, W, H):
    if W.shape[0] != X.shape[0] or W.shape[1] != H.shape[0] or H.shape[1] != X.shape[1]:
        raise ShapeMismatchError(
            f"inconsistent shapes X{X.shape}, W{W.shape}, H{H.shape}", X.shape, W.shape, H.shape
        )


def tau_condition(prior, WtX, lam):
    """Whether ``tau <= lam / max(W^T X)`` (z=1 power priors only)."""
    if prior.family not in ("rgdp", "block_rgdp"):
        return None
    top = float(np.max(WtX)) if WtX.size else 0.0
    if top <= 0:
        return True
    return bool(prior.tau <= lam / top)


def kkt_residual(X, W, H, prior, lam):
    X = check_nonneg(X, "X")
    W = check_nonneg(W, "W")
    H = check_nonneg(H, "H")
    _shapes(X, W, H)
    WtX = W.T @ X
    grad = W.T @ (W @ H) - WtX + lam * penalty_gradient(prior, H)
    res = np.minimum(H, grad)
    flags = {
        "tau_lambda_condition": tau_condition(prior, WtX, lam),
        "tau": prior.tau,
        "lambda": float(lam),
    }
    return KktReport(res, float(np.mean(np.abs(res))), flags)


@dataclass
class SparsityProfile:
    curve: np.ndarray
    counts: np.ndarray
    threshold: float

    @property
    def mean_count(self):
        return float(np.mean(self.counts))


def sparsity_profile(H, threshold=DEFAULT_SUPPORT_THRESHOLD):
    """Average sorted coefficient curve and per-column support counts.

    ``curve[i]`` is the ``(i+1)``-th largest magnitude of a column, averaged
    over columns.  ``counts[j]`` is the number of entries of column ``j``
    above ``threshold``.
    """
    H = np.abs(np.asarray(H, dtype=np.float64))
    if H.ndim == 1:
        H = H.reshape(-1, 1)
    desc = -np.sort(-H, axis=0)
    return SparsityProfile(desc.mean(axis=1), np.sum(H > threshold, axis=0), threshold)


def q_function(H, Ht, X, W, prior, lam):
    """EM auxiliary function ``Q(H | Ht)`` including its constant.

    ``||X - W H||_F^2 + 2 lam [pen(Ht) + sum (Omega(Ht)/z) (H^z - Ht^z)]``.
    The bracket is the tangent of the penalty in ``H^z`` at ``Ht``, so
    ``Q(Ht | Ht) == objective(Ht)`` and ``Q(H | Ht) >= objective(H)``.
    """
    H = check_nonneg(H, "H")
    Ht = check_nonneg(Ht, "Ht")
    X = check_nonneg(X, "X")
    W = check_nonneg(W, "W")
    _shapes(X, W, H)
    if H.shape != Ht.shape:
        raise ShapeMismatchError("H and Ht differ in shape", H.shape, Ht.shape)
    fit = float(np.sum((X - W @ H) ** 2))
    if lam == 0:
        return fit
    omega = weight_matrix(prior, Ht)
    z = prior.z
    tangent = np.sum(omega / z * (H ** z - Ht ** z))
    return fit + 2.0 * lam * (neg_log_prior(prior, Ht) + float(tangent))
