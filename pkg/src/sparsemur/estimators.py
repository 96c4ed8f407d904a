"""scikit-learn style wrappers.

Both estimators follow the scikit-learn orientation: samples are rows, so
the data matrix passed to ``fit``/``transform`` is ``X.T`` of the solver
functions, ``components_`` is ``W.T`` and ``transform`` returns ``H.T``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .blocksparse import BlockStructure
from .exceptions import ValidationError
from .matcore import check_nonneg
from .priors import BLOCK_FAMILIES, NONINFORMATIVE, PriorSpec, canonical_family
from .snmf import snmf_solve
from .snnls import AnnealSchedule, SolverConfig, snnls_solve


def _prior(family, tau, alpha, blocks, n):
    if family is None:
        return PriorSpec(NONINFORMATIVE)
    family = canonical_family(family)
    if family in BLOCK_FAMILIES:
        if blocks is None:
            raise ValidationError(f"prior {family!r} needs blocks")
        if isinstance(blocks, int):
            blocks = BlockStructure.contiguous(n, blocks)
        elif not isinstance(blocks, BlockStructure):
            blocks = BlockStructure(blocks)
        return PriorSpec(family, tau, alpha, blocks=blocks)
    return PriorSpec(family, tau, alpha)


class SparseNNLS(TransformerMixin, BaseEstimator):
    """Sparse non-negative coding of samples against a fixed dictionary.

    Parameters
    ----------
    dictionary : array-like, shape (n_atoms, n_features)
        Non-negative atoms as rows (the transpose of ``W``).
    prior : str or None
        Prior family; None means plain NNLS by multiplicative updates.
    tau, alpha : float
        Prior parameters (``alpha`` None selects the family default).
    lam : float
        Regularization weight.
    inner_iters, outer_cap, conv_tol : solver settings
    anneal : bool
        Anneal ``tau`` from 1 by factors of 10 (Student's-t priors only).
    anneal_steps : int
    blocks : int, list of lists or BlockStructure, optional
        Block structure over the atoms for block priors; an int means
        contiguous blocks of that size.

    Attributes
    ----------
    components_ : ndarray, shape (n_atoms, n_features)
    n_features_in_ : int
    """

    def __init__(self, dictionary=None, *, prior="rgdp", tau=0.1, alpha=None, lam=1e-2,
                 inner_iters=1, outer_cap=1000, conv_tol=1e-9, anneal=False, anneal_steps=8,
                 blocks=None):
        self.dictionary = dictionary
        self.prior = prior
        self.tau = tau
        self.alpha = alpha
        self.lam = lam
        self.inner_iters = inner_iters
        self.outer_cap = outer_cap
        self.conv_tol = conv_tol
        self.anneal = anneal
        self.anneal_steps = anneal_steps
        self.blocks = blocks

    def _config(self):
        schedule = AnnealSchedule(max_steps=self.anneal_steps) if self.anneal else None
        return SolverConfig(lam=self.lam, inner_iters=self.inner_iters, outer_cap=self.outer_cap,
                            conv_tol=self.conv_tol, anneal=schedule)

    def fit(self, X=None, y=None):
        """Validate parameters and store the dictionary; ``X`` is only shape-checked."""
        if self.dictionary is None:
            raise ValidationError("SparseNNLS needs a dictionary")
        D = check_nonneg(self.dictionary, "dictionary")
        if np.any(np.all(D == 0, axis=1)):
            raise ValidationError("dictionary has an all-zero atom")
        self._prior_ = _prior(self.prior, self.tau, self.alpha, self.blocks, D.shape[0])
        self._config_ = self._config()
        self.components_ = D
        self.n_features_in_ = D.shape[1]
        if X is not None:
            X = check_nonneg(X, "X")
            if X.shape[1] != self.n_features_in_:
                raise ValidationError(f"X has {X.shape[1]} features, dictionary has {self.n_features_in_}")
        return self

    def transform(self, X):
        """Codes of shape ``(n_samples, n_atoms)``."""
        check_is_fitted(self, "components_")
        X = check_nonneg(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        res = snnls_solve(X.T, self.components_.T, prior=self._prior_, config=self._config_)
        return res.H.T


class SparseNMF(TransformerMixin, BaseEstimator):
    """Sparse NMF ``X ~ H W^T`` (rows are samples).

    Parameters
    ----------
    n_components : int
    prior_h, tau_h : prior on the codes
    prior_w, tau_w : prior on the dictionary; None gives S-NMF (plain
        update for the dictionary), a family gives S-NMF-W.
    lam : float
    inner_iters : int
        Multiplicative updates per half step.
    max_iter : int
        Number of alternations.
    normalize_w : bool
        Keep atoms at unit l2 norm.
    transform_outer_cap : int
        EM iterations used by :meth:`transform` on new data.

    Attributes
    ----------
    components_ : ndarray, shape (n_components, n_features)
    n_iter_ : int
    reconstruction_err_ : float
        Frobenius norm of the residual on the training data.
    objective_trace_ : list
    """

    def __init__(self, n_components=10, *, prior_h="rgdp", tau_h=0.1, prior_w=None, tau_w=0.1,
                 lam=1e-2, inner_iters=1, max_iter=200, normalize_w=True, transform_outer_cap=1000,
                 conv_tol=1e-9):
        self.n_components = n_components
        self.prior_h = prior_h
        self.tau_h = tau_h
        self.prior_w = prior_w
        self.tau_w = tau_w
        self.lam = lam
        self.inner_iters = inner_iters
        self.max_iter = max_iter
        self.normalize_w = normalize_w
        self.transform_outer_cap = transform_outer_cap
        self.conv_tol = conv_tol

    def fit_transform(self, X, y=None):
        X = check_nonneg(X, "X")
        n = self.n_components
        config = SolverConfig(lam=self.lam, inner_iters=self.inner_iters, outer_cap=self.max_iter,
                              conv_tol=self.conv_tol)
        res = snmf_solve(X.T, n, prior_h=_prior(self.prior_h, self.tau_h, None, None, n),
                         prior_w=_prior(self.prior_w, self.tau_w, None, None, n),
                         config=config, normalize_w=self.normalize_w)
        self.components_ = res.W.T
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = res.outer_iters
        self.objective_trace_ = res.objective_trace
        self.reconstruction_err_ = float(np.linalg.norm(X.T - res.W @ res.H))
        self._prior_h_ = res.prior_h
        return res.H.T

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_nonneg(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        config = SolverConfig(lam=self.lam, inner_iters=self.inner_iters,
                              outer_cap=self.transform_outer_cap, conv_tol=self.conv_tol)
        return snnls_solve(X.T, self.components_.T, prior=self._prior_h_, config=config).H.T

    def inverse_transform(self, H):
        check_is_fitted(self, "components_")
        return np.asarray(H, dtype=np.float64) @ self.components_
