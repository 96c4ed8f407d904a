"""Sparse NMF by alternating S-NNLS passes on ``H`` and on ``W^T``.

Each outer iteration runs one EM iteration (``inner_iters`` multiplicative
updates) of the S-NNLS engine on the transposed problem ``X^T ~ H^T W^T``
to update ``W``, then one on ``X ~ W H`` to update ``H``.  With a
non-informative ``prior_w`` the ``W`` step is the plain Lee-Seung rule
(S-NMF); with a sparsity prior on ``W`` it is the general rule (S-NMF-W).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .diagnostics import kkt_residual
from .exceptions import NumericalError, ShapeMismatchError, ValidationError
from .matcore import check_nonneg, normalize_columns
from .priors import NONINFORMATIVE, PriorSpec, neg_log_prior
from .snnls import GENERAL, PLAIN_NMF, SolverConfig, _solve


@dataclass
class FactorizationResult:
    """Output of :func:`snmf_solve`.

    ``objective_trace`` interleaves half steps: entry ``2t`` is the
    objective at ``(W^t, H^t)`` and entry ``2t+1`` at ``(W^{t+1}, H^t)``.
    When ``normalize_w`` is on the rescaling happens before the half-step
    value is recorded.
    """

    W: np.ndarray
    H: np.ndarray
    objective_trace: list
    outer_iters: int
    kkt_residuals: tuple
    converged: bool = False
    prior_w: Optional[PriorSpec] = None
    prior_h: Optional[PriorSpec] = None
    history: dict = field(default_factory=dict)


def snmf_objective(X, W, H, prior_w, prior_h, lam):
    """``||X - W H||_F^2 + 2 lam [pen_h(H) + pen_w(W)]``.

    The penalty on ``W`` is evaluated on ``W^T`` (atoms as rows), which is
    how the ``W`` step sees it.  ``None`` priors count as non-informative.
    """
    X = check_nonneg(X, "X")
    W = check_nonneg(W, "W")
    H = check_nonneg(H, "H")
    if W.shape[0] != X.shape[0] or H.shape != (W.shape[1], X.shape[1]):
        raise ShapeMismatchError(
            f"inconsistent shapes X{X.shape}, W{W.shape}, H{H.shape}", X.shape, W.shape, H.shape
        )
    return _objective(X, W, H, prior_w, prior_h, lam)


def _objective(X, W, H, prior_w, prior_h, lam):
    R = X - W @ H
    val = float(np.sum(R * R))
    if lam == 0:
        return val
    for prior, M in ((prior_h, H), (prior_w, W.T)):
        if prior is not None and prior.family != NONINFORMATIVE:
            val += 2.0 * lam * neg_log_prior(prior, M)
    return val


def snmf_solve(X, n, prior_h=None, prior_w=None, config=None, normalize_w=False):
    """Factor ``X ~ W H`` with ``W`` of shape ``(d, n)`` and ``H`` of shape ``(n, m)``.

    Parameters
    ----------
    X : array-like, shape (d, m)
    n : int
        Dictionary size.
    prior_h, prior_w : PriorSpec, optional
        Priors on ``H`` and on ``W`` (the latter applied to ``W^T``).
        Omitted means non-informative.
    config : SolverConfig, optional
        ``inner_iters`` is ``S`` for both half steps, ``outer_cap`` the
        number of alternations.  Annealing is not supported here.
    normalize_w : bool
        Rescale ``W`` to unit column norms after every ``W`` step and push
        the scales into the rows of ``H``; ``W H`` is unchanged.  The
        monotonicity guarantee only covers ``normalize_w=False``.
    """
    X = check_nonneg(X, "X")
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValidationError(f"dictionary size n must be a positive integer, got {n!r}")
    n = int(n)
    config = config or SolverConfig()
    if config.anneal is not None:
        raise ValidationError("annealing is not supported by snmf_solve")
    prior_h = prior_h or PriorSpec(NONINFORMATIVE)
    prior_w = prior_w or PriorSpec(NONINFORMATIVE)
    for name, p, size in (("prior_h", prior_h, n), ("prior_w", prior_w, n)):
        if p.is_block and p.blocks.n != size:
            raise ValidationError(f"{name} blocks cover {p.blocks.n} rows, expected {size}")

    d, m = X.shape
    lam = float(config.lam)
    W = np.ones((d, n))
    H = np.ones((n, m))
    Xt = X.T
    cfg_h = replace(config, outer_cap=1, update_rule=GENERAL)
    w_rule = PLAIN_NMF if prior_w.family == NONINFORMATIVE else GENERAL
    cfg_w = replace(config, outer_cap=1, update_rule=w_rule)

    trace = [_objective(X, W, H, prior_w, prior_h, lam)]
    converged = False
    t = 0
    cap = config.outer_cap
    while cap is None or t < cap:
        t += 1
        rw = _solve(Xt, H.T, W.T.copy(), prior_w, cfg_w, with_kkt=False)
        W = rw.H.T
        if normalize_w:
            W, scales = normalize_columns(W)
            H = H * scales[:, None]
        trace.append(_objective(X, W, H, prior_w, prior_h, lam))
        rh = _solve(X, W, H, prior_h, cfg_h, with_kkt=False)
        H = rh.H
        trace.append(_objective(X, W, H, prior_w, prior_h, lam))
        if not (np.isfinite(W).all() and np.isfinite(H).all()):
            raise NumericalError("non-finite factor entries", iteration=t)
        if rw.converged and rh.converged:
            converged = True
            break

    kw = kkt_residual(Xt, H.T, W.T, prior_w, lam if prior_w.family != NONINFORMATIVE else 0.0)
    kh = kkt_residual(X, W, H, prior_h, lam)
    return FactorizationResult(
        W=W,
        H=H,
        objective_trace=trace,
        outer_iters=t,
        kkt_residuals=(kw.normalized_norm, kh.normalized_norm),
        converged=converged,
        prior_w=prior_w,
        prior_h=prior_h,
        history={"kkt_w": kw, "kkt_h": kh},
    )
