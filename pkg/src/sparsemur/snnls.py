"""Sparse NNLS by multiplicative updates inside a generalized EM loop.

The engine runs the double loop of the S-NNLS algorithm: the outer (EM)
loop rebuilds the prior weights from the current estimate, the inner loop
applies ``inner_iters`` multiplicative updates

    H <- H * (W^T X) / (W^T W H + lam * Omega * H**(z-1))

over a shrinking set of coordinates.  Coordinates that reach zero or stop
moving are pruned from the inner set, and from the outer set across EM
iterations; the run ends when the outer set is empty or ``outer_cap`` is hit.

Objective convention
--------------------
The update above is a majorize-minimize step for

    L(H) = ||X - W H||_F^2 + 2 * lam * penalty(H)

(equivalently ``0.5 ||X - W H||^2 + lam * penalty``), and its fixed points
are exactly the KKT points ``min(H, W^T W H - W^T X + lam * dpenalty) = 0``.
``objective`` therefore reports ``L`` with the factor 2 on the penalty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .diagnostics import KktReport, kkt_residual, tau_condition
from .exceptions import NumericalError, ShapeMismatchError, ValidationError
from .matcore import DEFAULT_FLOOR, check_nonneg
from .priors import (
    BLOCK_RST,
    EXPONENTIAL,
    NONINFORMATIVE,
    RST,
    PriorSpec,
    neg_log_prior,
    weight_matrix,
)

GENERAL = "general"
PLAIN_NMF = "nmf"
L1 = "l1"
UPDATE_RULES = (GENERAL, PLAIN_NMF, L1)


@dataclass(frozen=True)
class AnnealSchedule:
    """Staged decrease of ``tau`` for the Student's-t priors.

    ``tau`` starts at ``tau0`` and is divided by ``factor`` (at most
    ``max_steps`` times) whenever every column's relative l2 change between
    EM iterates falls below ``trigger_scale * sqrt(tau)``.
    """

    tau0: float = 1.0
    factor: float = 10.0
    max_steps: int = 8
    trigger_scale: float = 0.01

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValidationError(f"tau0 must be positive, got {self.tau0!r}")
        if not self.factor > 1:
            raise ValidationError(f"factor must exceed 1, got {self.factor!r}")
        if int(self.max_steps) < 0:
            raise ValidationError("max_steps must be >= 0")

    def trigger(self, tau):
        return self.trigger_scale * math.sqrt(tau)

    def taus(self):
        """All values tau can take, in order."""
        return [self.tau0 / self.factor ** i for i in range(int(self.max_steps) + 1)]


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    Parameters
    ----------
    lam : float
        Regularization weight, >= 0.
    inner_iters : int
        Multiplicative updates per EM iteration (``S``).
    outer_cap : int or None
        Maximum number of EM iterations; None runs until the outer set
        empties.
    conv_tol : float
        A coordinate whose relative change is at most ``conv_tol`` counts
        as stalled.
    zero_tol : float
        Entries that drop below this are set to exactly 0.
    update_rule : {"general", "nmf", "l1"}
        ``general`` uses the prior's weights; ``nmf`` is the plain
        Lee-Seung rule (no penalty); ``l1`` uses unit weights.
    anneal : AnnealSchedule or None
    floor : float
        Denominator floor of the multiplicative rule.
    """

    lam: float = 1e-2
    inner_iters: int = 1
    outer_cap: Optional[int] = 1000
    conv_tol: float = 1e-9
    zero_tol: float = 1e-12
    update_rule: str = GENERAL
    anneal: Optional[AnnealSchedule] = None
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValidationError(f"lam must be a finite non-negative real, got {self.lam!r}")
        if int(self.inner_iters) < 1:
            raise ValidationError(f"inner_iters must be >= 1, got {self.inner_iters!r}")
        if self.outer_cap is not None and int(self.outer_cap) < 1:
            raise ValidationError(f"outer_cap must be >= 1 or None, got {self.outer_cap!r}")
        if not self.conv_tol > 0 or not self.zero_tol > 0:
            raise ValidationError("conv_tol and zero_tol must be positive")
        if not self.zero_tol < self.conv_tol:
            raise ValidationError("zero_tol must be smaller than conv_tol")
        if self.update_rule not in UPDATE_RULES:
            raise ValidationError(f"update_rule must be one of {UPDATE_RULES}, got {self.update_rule!r}")
        if not self.floor > 0:
            raise ValidationError("floor must be positive")

    def to_dict(self):
        out = {
            "lambda": self.lam,
            "inner_iters": self.inner_iters,
            "outer_cap": self.outer_cap,
            "conv_tol": self.conv_tol,
            "zero_tol": self.zero_tol,
            "update_rule": self.update_rule,
        }
        if self.anneal is not None:
            a = self.anneal
            out["anneal"] = {"tau0": a.tau0, "factor": a.factor, "max_steps": a.max_steps}
        return out


@dataclass
class SolverResult:
    """Output of :func:`snnls_solve`.

    ``objective_trace[t]`` is ``L`` at the ``t``-th EM iterate (index 0 is
    the starting point).  ``active_history[t]`` counts the coordinates pruned
    from the outer set after iteration ``t+1``.  ``tau_history`` gives the
    prior's tau in force for each trace entry (constant unless annealing).
    """

    H: np.ndarray
    objective_trace: list
    kkt_residual: float
    iterations: int
    active_history: list
    kkt: Optional[KktReport] = None
    tau_history: list = field(default_factory=list)
    converged: bool = False
    condition_held: Optional[bool] = None
    prior: Optional[PriorSpec] = None


def effective_prior(prior, update_rule):
    """Prior actually used by ``update_rule``."""
    if update_rule == PLAIN_NMF:
        return PriorSpec(NONINFORMATIVE)
    if update_rule == L1:
        return PriorSpec(EXPONENTIAL)
    return prior if prior is not None else PriorSpec(NONINFORMATIVE)


def _check_problem(X, W, H):
    if W.shape[0] != X.shape[0]:
        raise ShapeMismatchError(
            f"X has {X.shape[0]} rows but W has {W.shape[0]}", X.shape, W.shape
        )
    if H.shape != (W.shape[1], X.shape[1]):
        raise ShapeMismatchError(
            f"H must have shape {(W.shape[1], X.shape[1])}, got {H.shape}", H.shape, W.shape, X.shape
        )


def objective(X, W, H, prior, lam):
    """``||X - W H||_F^2 + 2 * lam * neg_log_prior(prior, H)``."""
    X = check_nonneg(X, "X")
    W = check_nonneg(W, "W")
    H = check_nonneg(H, "H")
    _check_problem(X, W, H)
    return _objective(X, W, H, prior, lam)


def _objective(X, W, H, prior, lam):
    R = X - W @ H
    fit = float(np.sum(R * R))
    if lam == 0 or prior.family == NONINFORMATIVE:
        return fit
    return fit + 2.0 * lam * neg_log_prior(prior, H)


def _gram(W):
    """``W^T W``, or ``W`` itself when ``W^T (W H)`` is the cheaper product.

    For ``d x n`` dictionaries with ``2 d < n`` two thin products cost less
    than one ``n x n`` product; otherwise the Gram matrix is formed once.
    """
    return W if 2 * W.shape[0] < W.shape[1] else W.T @ W


def _mur(WtW, WtX, Hs, omega, z, lam, active, floor):
    # WtW is the Gram matrix (square) or the dictionary itself (wide)
    den = WtW @ Hs if WtW.shape[0] == WtW.shape[1] else WtW.T @ (WtW @ Hs)
    if lam != 0:
        den = den + lam * (omega * Hs if z == 2 else omega)
    new = Hs * WtX / np.maximum(den, floor)
    if active is not None:
        new = np.where(active, new, Hs)
    return new


def mur_step(W, X, Hs, omega, z, lam, active=None, *, floor=DEFAULT_FLOOR):
    """One multiplicative update ``Hs -> Hs * W^T X / (W^T W Hs + lam Omega Hs^(z-1))``.

    Parameters
    ----------
    omega : ndarray
        Weight matrix (see :func:`sparsemur.priors.weight_matrix`).
    active : bool ndarray, optional
        Coordinates to update; the others are copied.  Defaults to every
        positive entry.

    Raises
    ------
    ValidationError
        If an active coordinate is not strictly positive.
    NumericalError
        If any input contains NaN.
    """
    for name, arr in (("W", W), ("X", X), ("Hs", Hs), ("omega", omega)):
        if np.isnan(np.asarray(arr, dtype=np.float64)).any():
            raise NumericalError(f"{name} contains NaN")
    W = check_nonneg(W, "W")
    X = check_nonneg(X, "X")
    Hs = check_nonneg(Hs, "Hs")
    omega = check_nonneg(omega, "omega")
    _check_problem(X, W, Hs)
    if omega.shape != Hs.shape:
        raise ShapeMismatchError("omega must match Hs", omega.shape, Hs.shape)
    if z not in (1, 2):
        raise ValidationError(f"z must be 1 or 2, got {z!r}")
    if active is None:
        active = Hs > 0
    else:
        active = np.asarray(active, dtype=bool)
        if active.shape != Hs.shape:
            raise ShapeMismatchError("active mask must match Hs", active.shape, Hs.shape)
        bad = np.argwhere(active & (Hs <= 0))
        if bad.size:
            r, c = bad[0]
            raise ValidationError(f"active coordinate ({r}, {c}) is not strictly positive")
    return _mur(_gram(W), W.T @ X, Hs, omega, z, lam, active, floor)


def snnls_solve(X, W, H0=None, prior=None, config=None):
    """Sparse NNLS: estimate ``H >= 0`` with ``X ~ W H`` under ``prior``.

    Parameters
    ----------
    X : array-like, shape (d, m)
    W : array-like, shape (d, n)
    H0 : array-like, shape (n, m), optional
        Starting point; all-ones by default.  Zero entries stay zero.
    prior : PriorSpec, optional
        Non-informative when omitted.
    config : SolverConfig, optional

    Returns
    -------
    SolverResult
    """
    X = check_nonneg(X, "X")
    W = check_nonneg(W, "W")
    if H0 is None:
        H0 = np.ones((W.shape[1], X.shape[1]))
    H0 = check_nonneg(H0, "H0", copy=True)
    _check_problem(X, W, H0)
    return _solve(X, W, H0, prior, config or SolverConfig())


def _solve(X, W, H, prior, config, WtW=None, WtX=None, with_kkt=True):
    prior = effective_prior(prior, config.update_rule)
    lam = float(config.lam)
    z = prior.z
    schedule = config.anneal
    if schedule is not None:
        if prior.family not in (RST, BLOCK_RST):
            raise ValidationError(f"annealing needs a Student's-t prior, got {prior.family!r}")
        prior = prior.with_tau(schedule.tau0)
    anneal_steps = 0

    if WtW is None:
        WtW = _gram(W)
    if WtX is None:
        WtX = W.T @ X
    floor = config.floor
    zero_tol = config.zero_tol
    conv_tol = config.conv_tol

    H = H.copy()
    H[H < zero_tol] = 0.0
    Z = H > 0
    trace = [_objective(X, W, H, prior, lam)]
    taus = [prior.tau]
    pruned = []
    t = 0
    use_penalty = lam != 0 and prior.family != NONINFORMATIVE

    while Z.any():
        omega = weight_matrix(prior, H) if use_penalty else None
        Hs = H
        J = Z.copy()
        for _ in range(int(config.inner_iters)):
            new = _mur(WtW, WtX, Hs, omega, z, lam if use_penalty else 0.0, J, floor)
            new[new < zero_tol] = 0.0
            stalled = np.abs(new - Hs) <= conv_tol * Hs
            J &= ~((new == 0) | stalled)
            Hs = new
            if not J.any():
                break
        t += 1
        if not np.isfinite(Hs).all():
            raise NumericalError("non-finite entries in H", iteration=t)
        Z &= ~((Hs == 0) | (np.abs(Hs - H) <= conv_tol * H))

        if schedule is not None and anneal_steps < schedule.max_steps:
            diff = np.linalg.norm(Hs - H, axis=0)
            ref = np.linalg.norm(H, axis=0)
            rel = np.divide(diff, ref, out=np.zeros_like(diff), where=ref > 0)
            if np.all(rel < schedule.trigger(prior.tau)):
                prior = prior.with_tau(prior.tau / schedule.factor)
                anneal_steps += 1
                Z = Hs > 0

        H = Hs
        trace.append(_objective(X, W, H, prior, lam))
        taus.append(prior.tau)
        pruned.append(int(Z.size - np.count_nonzero(Z)))
        if config.outer_cap is not None and t >= config.outer_cap:
            break

    result = SolverResult(
        H=H,
        objective_trace=trace,
        kkt_residual=float("nan"),
        iterations=t,
        active_history=pruned,
        tau_history=taus,
        converged=not Z.any(),
        condition_held=tau_condition(prior, WtX, lam),
        prior=prior,
    )
    if with_kkt:
        report = kkt_residual(X, W, H, prior, lam)
        result.kkt = report
        result.kkt_residual = report.normalized_norm
    return result
