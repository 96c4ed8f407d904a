"""Synthetic recovery experiments: generators, trial runner, annealing driver.

Problems are noiseless, ``X = W H`` with a rectified-Gaussian dictionary
of unit-norm columns and ``k``-sparse (or ``k``-block-sparse) codes.  Every
trial draws its data from a seed derived from ``(seed, n, k, trial)`` so a
suite is reproducible cell by cell and in any execution order.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .baselines import nn_bomp_matrix, nnls_matrix, topk_block_refine, topk_refine
from .blocksparse import BlockStructure
from .exceptions import ValidationError
from .matcore import normalize_columns
from .priors import BLOCK_FAMILIES, PriorSpec, canonical_family
from .snnls import L1, AnnealSchedule, SolverConfig, snnls_solve

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (1e-4, 1e-3, 1e-2)

SNNLS = "snnls"
L1_MUR = "l1_mur"
NNLS_TOPK = "nnls_topk"
NN_OMP = "nn_omp"
NN_BOMP = "nn_bomp"
METHODS = (SNNLS, L1_MUR, NNLS_TOPK, NN_OMP, NN_BOMP)

# With a few hundred multiplicative updates per EM iteration the iterates
# rarely move less than sqrt(tau)/100 between EM iterations, so tau would
# hardly anneal within a desk-scale budget; sqrt(tau)/10 lets it progress.
DESK_ANNEAL = AnnealSchedule(tau0=1.0, factor=10.0, max_steps=8, trigger_scale=0.1)


def gen_dictionary(d, n, seed):
    """``|N(0, 1)|`` entries, columns scaled to unit l2 norm."""
    if d < 1 or n < 1:
        raise ValidationError(f"d and n must be >= 1, got d={d}, n={n}")
    rng = np.random.default_rng(seed)
    W = np.abs(rng.standard_normal((d, n)))
    return normalize_columns(W)[0]


def gen_sparse_codes(n, m, k, seed, blocks=None):
    """Columns with ``k`` random non-zeros (or ``k`` random blocks).

    Values are ``|N(0, 1)|`` and every non-zero column has unit l2 norm.
    ``k = 0`` gives the zero matrix.
    """
    if n < 1 or m < 1:
        raise ValidationError(f"n and m must be >= 1, got n={n}, m={m}")
    limit = n if blocks is None else blocks.n_blocks
    if blocks is not None and blocks.n != n:
        raise ValidationError(f"block structure covers {blocks.n} rows, expected {n}")
    if not 0 <= k <= limit:
        raise ValidationError(f"k must be in [0, {limit}], got {k}")
    rng = np.random.default_rng(seed)
    H = np.zeros((n, m))
    for j in range(m):
        picks = rng.choice(limit, size=k, replace=False)
        if blocks is None:
            rows = picks
        else:
            rows = np.concatenate([blocks.groups[b] for b in picks]) if k else np.empty(0, dtype=int)
        H[rows, j] = np.abs(rng.standard_normal(len(rows)))
    return normalize_columns(H)[0]


def trial_seeds(seed, n, k, trial):
    """Seeds for ``(W, H, noise)`` of one trial."""
    ss = np.random.SeedSequence([int(seed), int(n), int(k), int(trial)])
    return [int(s) for s in ss.generate_state(3)]


def make_problem(d, n, m, k, seed, trial, block_size=None, noise=0.0):
    """Draw ``(W, H, X)`` for one trial."""
    s_w, s_h, s_e = trial_seeds(seed, n, k, trial)
    blocks = BlockStructure.contiguous(n, block_size) if block_size else None
    W = gen_dictionary(d, n, s_w)
    H = gen_sparse_codes(n, m, k, s_h, blocks)
    X = W @ H
    if noise > 0:
        X = np.maximum(X + noise * np.random.default_rng(s_e).standard_normal(X.shape), 0.0)
    return W, H, X


@dataclass(frozen=True)
class SolverEntry:
    """One method in a suite.

    ``method`` is one of ``METHODS``.  ``family``/``tau`` describe the prior
    for ``snnls`` (block families get contiguous blocks of the suite's
    ``block_size``).  When ``lambdas`` has several values the one with the
    lowest mean error on ``validation_trials`` held-out problems is used.
    """

    name: str
    method: str = SNNLS
    family: Optional[str] = None
    tau: float = 0.1
    lambdas: tuple = DEFAULT_LAMBDAS
    inner_iters: int = 200
    outer_cap: int = 50
    anneal: Optional[AnnealSchedule] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == SNNLS and self.family is None:
            raise ValidationError(f"solver {self.name!r} needs a prior family")
        if self.family is not None:
            object.__setattr__(self, "family", canonical_family(self.family))
        lams = tuple(float(v) for v in self.lambdas)
        if not lams:
            raise ValidationError("lambdas must not be empty")
        object.__setattr__(self, "lambdas", lams)

    @property
    def uses_lambda(self):
        return self.method in (SNNLS, L1_MUR)

    def prior(self, n, block_size=None):
        if self.method != SNNLS:
            return None
        blocks = None
        if self.family in BLOCK_FAMILIES:
            if not block_size:
                raise ValidationError(f"solver {self.name!r} needs a block size")
            blocks = BlockStructure.contiguous(n, block_size)
        tau = self.anneal.tau0 if self.anneal is not None else self.tau
        return PriorSpec(self.family, tau, blocks=blocks)

    def config(self, lam):
        return SolverConfig(
            lam=lam,
            inner_iters=self.inner_iters,
            outer_cap=self.outer_cap,
            anneal=self.anneal,
            update_rule=L1 if self.method == L1_MUR else "general",
        )

    def to_dict(self):
        out = {
            "name": self.name,
            "method": self.method,
            "family": self.family,
            "tau": self.tau,
            "lambdas": list(self.lambdas),
            "inner_iters": self.inner_iters,
            "outer_cap": self.outer_cap,
        }
        if self.anneal is not None:
            a = self.anneal
            out["anneal"] = {"tau0": a.tau0, "factor": a.factor, "max_steps": a.max_steps,
                             "trigger_scale": a.trigger_scale}
        return out


def default_solvers(lambdas=DEFAULT_LAMBDAS):
    """Reweighted l2 (annealed), reweighted l1, the l1 MUR and greedy/NNLS baselines."""
    return (
        SolverEntry("rl2", SNNLS, "rst", lambdas=lambdas, anneal=DESK_ANNEAL),
        SolverEntry("rl1", SNNLS, "rgdp", tau=0.1, lambdas=lambdas),
        SolverEntry("l1_mur", L1_MUR, lambdas=lambdas),
        SolverEntry("nn_omp", NN_OMP),
        SolverEntry("nnls_topk", NNLS_TOPK),
    )


def default_block_solvers(lambdas=DEFAULT_LAMBDAS):
    return (
        SolverEntry("brst", SNNLS, "block_rst", lambdas=lambdas, anneal=DESK_ANNEAL),
        SolverEntry("brgdp", SNNLS, "block_rgdp", tau=0.1, lambdas=lambdas),
        SolverEntry("nn_bomp", NN_BOMP),
    )


@dataclass(frozen=True)
class TrialSpec:
    """Experiment cell: problem size, sparsity, seeds and solvers.

    ``k`` counts coordinates, or blocks when ``block_size`` is set.
    """

    d: int = 100
    n: int = 400
    m: int = 20
    k: int = 10
    seed: int = 0
    trials: int = 10
    block_size: Optional[int] = None
    solvers: tuple = field(default_factory=default_solvers)
    refine: bool = True
    validation_trials: int = 2
    noise: float = 0.0

    def __post_init__(self):
        for name in ("d", "n", "m", "trials"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.block_size is not None:
            if self.block_size < 1:
                raise ValidationError("block_size must be >= 1")
            limit = math.ceil(self.n / self.block_size)
        else:
            limit = self.n
        if not 0 <= self.k <= limit:
            raise ValidationError(f"k must be in [0, {limit}], got {self.k}")
        if self.validation_trials < 1:
            raise ValidationError("validation_trials must be >= 1")
        if self.noise < 0:
            raise ValidationError("noise must be >= 0")
        if not self.solvers:
            raise ValidationError("at least one solver is required")

    @property
    def k_entries(self):
        """Number of non-zero coefficients per column."""
        if self.block_size is None:
            return self.k
        blocks = BlockStructure.contiguous(self.n, self.block_size)
        return sum(len(blocks.groups[b]) for b in range(self.k)) if self.k else 0

    def to_dict(self):
        return {
            "d": self.d, "n": self.n, "m": self.m, "k": self.k, "seed": self.seed,
            "trials": self.trials, "block_size": self.block_size, "refine": self.refine,
            "validation_trials": self.validation_trials, "noise": self.noise,
            "solvers": [s.to_dict() for s in self.solvers],
        }


def relative_error(H, Hhat):
    """``||H - Hhat||_F / ||H||_F``; the absolute error when ``H = 0``."""
    ref = np.linalg.norm(H)
    diff = float(np.linalg.norm(H - Hhat))
    return diff / ref if ref > 0 else diff


def _estimate(entry, spec, W, X, lam):
    n = W.shape[1]
    if entry.method in (SNNLS, L1_MUR):
        res = snnls_solve(X, W, prior=entry.prior(n, spec.block_size), config=entry.config(lam))
        return res.H, {"kkt": res.kkt_residual, "iterations": res.iterations}
    if spec.k == 0:
        return np.zeros((n, X.shape[1])), {}
    if entry.method == NNLS_TOPK:
        return nnls_matrix(X, W), {}
    if entry.method == NN_OMP:
        return nn_bomp_matrix(X, W, None, spec.k_entries), {}
    blocks = BlockStructure.contiguous(n, spec.block_size or 1)
    return nn_bomp_matrix(X, W, blocks, spec.k), {}


def run_trial(entry, spec, trial, lam, seed=None):
    """Run one solver on one trial; returns a dict of metrics.

    Solver exceptions are caught and reported under ``"error_message"``.
    """
    seed = spec.seed if seed is None else seed
    W, H, X = make_problem(spec.d, spec.n, spec.m, spec.k, seed, trial, spec.block_size, spec.noise)
    t0 = time.perf_counter()
    try:
        Hhat, extra = _estimate(entry, spec, W, X, lam)
        raw = relative_error(H, Hhat)
        if spec.refine:
            if spec.k == 0:
                Href = np.zeros_like(Hhat)
            elif spec.block_size:
                blocks = BlockStructure.contiguous(spec.n, spec.block_size)
                Href = topk_block_refine(Hhat, spec.k, X, W, blocks)
            else:
                Href = topk_refine(Hhat, spec.k, X, W)
            err = relative_error(H, Href)
        else:
            err = raw
    except (ArithmeticError, ValueError) as exc:
        logger.warning("solver %s failed on trial %d: %s", entry.name, trial, exc)
        return {"trial": trial, "failed": True, "error_message": f"{type(exc).__name__}: {exc}"}
    out = {
        "trial": trial,
        "failed": False,
        "error": err,
        "error_raw": raw,
        "nnz": float(np.mean(np.sum(Hhat > 1e-6, axis=0))),
        "time": time.perf_counter() - t0,
    }
    out.update(extra)
    return out


def _validation_seed(spec):
    return int(np.random.SeedSequence([int(spec.seed), 0x5EED]).generate_state(1)[0])


def select_lambda(entry, spec, jobs=1):
    """Held-out choice of ``lam`` among ``entry.lambdas``.

    Validation problems come from a seed stream disjoint from the test
    trials.  Ties go to the first listed value.
    """
    if not entry.uses_lambda or len(entry.lambdas) == 1:
        return entry.lambdas[0], {}
    vseed = _validation_seed(spec)
    scores = {}
    for lam in entry.lambdas:
        runs = _map(jobs, [(entry, spec, t, lam, vseed) for t in range(spec.validation_trials)])
        errs = [r["error"] for r in runs if not r["failed"]]
        scores[lam] = float(np.mean(errs)) if errs else math.inf
    best = min(entry.lambdas, key=lambda v: scores[v])
    return best, scores


def _map(jobs, tasks):
    if jobs == 1 or len(tasks) <= 1:
        return [run_trial(*t) for t in tasks]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=jobs)(delayed(run_trial)(*t) for t in tasks)


def _summary(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    return float(arr.mean()), float(arr.std())


def run_recovery_suite(spec, jobs=1, timing=False):
    """Run every solver of ``spec`` for ``spec.trials`` trials.

    Returns
    -------
    dict
        ``{"spec": ..., "rows": [...]}`` with one row per solver holding
        mean/std of the refined and raw relative errors, the chosen
        ``lambda``, failure count and mean support size.  Wall times are
        only included with ``timing=True`` so that reports stay
        reproducible byte for byte.
    """
    rows = []
    for entry in spec.solvers:
        lam, scores = select_lambda(entry, spec, jobs)
        runs = _map(jobs, [(entry, spec, t, lam, None) for t in range(spec.trials)])
        ok = [r for r in runs if not r["failed"]]
        err_mean, err_std = _summary([r["error"] for r in ok])
        raw_mean, raw_std = _summary([r["error_raw"] for r in ok])
        row = {
            "solver": entry.name,
            "method": entry.method,
            "d": spec.d,
            "n": spec.n,
            "m": spec.m,
            "k": spec.k,
            "block_size": spec.block_size,
            "trials": spec.trials,
            "lambda": lam if entry.uses_lambda else None,
            "error_mean": err_mean,
            "error_std": err_std,
            "error_raw_mean": raw_mean,
            "error_raw_std": raw_std,
            "nnz_mean": _summary([r["nnz"] for r in ok])[0],
            "failures": len(runs) - len(ok),
            "failure_messages": [r["error_message"] for r in runs if r["failed"]],
        }
        if entry.uses_lambda:
            row["kkt_mean"] = _summary([r["kkt"] for r in ok])[0]
            row["lambda_scores"] = {repr(k): v for k, v in scores.items()}
        if timing:
            row["time_mean"] = _summary([r["time"] for r in ok])[0]
        rows.append(row)
    return {"spec": spec.to_dict(), "rows": rows}


def sweep(spec, k_values=None, n_values=None, jobs=1, timing=False):
    """Run the suite over a grid of ``k`` and ``n``; rows are concatenated."""
    rows = []
    for n in n_values or (spec.n,):
        for k in k_values or (spec.k,):
            cell = replace(spec, n=int(n), k=int(k))
            rows.extend(run_recovery_suite(cell, jobs=jobs, timing=timing)["rows"])
    return {"spec": spec.to_dict(), "k_values": list(k_values or (spec.k,)),
            "n_values": list(n_values or (spec.n,)), "rows": rows}


def anneal_driver(X, W, schedule, prior=None, config=None, H0=None):
    """S-NNLS with ``tau`` annealed according to ``schedule``.

    The prior must be a Student's-t family (scalar or block); its ``tau``
    is replaced by ``schedule.tau0``.  The trajectory is available as
    ``result.tau_history``.
    """
    prior = prior or PriorSpec("rst", schedule.tau0)
    config = replace(config or SolverConfig(), anneal=schedule)
    return snnls_solve(X, W, H0=H0, prior=prior, config=config)
