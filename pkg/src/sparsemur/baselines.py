"""Comparison methods: Lawson-Hanson NNLS, non-negative (block) OMP and the
top-k threshold-and-refit post-process."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocksparse import BlockStructure
from .exceptions import ConvergenceError, ShapeMismatchError, ValidationError
from .matcore import DEFAULT_FLOOR, check_nonneg


@dataclass
class SupportSet:
    indices: tuple
    residual_norm: float
    residual_history: list = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValidationError("support indices must be unique")


def nnls_active_set(x, W, *, tol=None, max_iter=None):
    """Lawson-Hanson active-set solution of ``min_{h >= 0} ||x - W h||_2``.

    Parameters
    ----------
    x : array-like, shape (d,)
    W : array-like, shape (d, n)
    tol : float, optional
        Dual-feasibility tolerance; defaults to ``10 eps max(d, n) ||W||_1 ||x||_inf``.
    max_iter : int, optional
        Cap on the total number of iterations (column additions plus
        step-backs), ``3 n`` by default.

    Raises
    ------
    ConvergenceError
        When the cap is hit; ``exc.partial`` holds the last feasible iterate.
    """
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    if W.ndim != 2 or W.shape[0] != x.shape[0]:
        raise ShapeMismatchError(f"W {W.shape} incompatible with x {x.shape}", W.shape, x.shape)
    d, n = W.shape
    if max_iter is None:
        max_iter = 3 * n
    if tol is None:
        scale = max(np.abs(W).sum(axis=0).max(initial=0.0), 1.0) * max(np.abs(x).max(initial=0.0), 1.0)
        tol = 10 * np.finfo(float).eps * max(d, n) * scale

    passive = np.zeros(n, dtype=bool)
    h = np.zeros(n)
    w = W.T @ (x - W @ h)
    it = 0
    while (~passive).any():
        cand = np.where(passive, -np.inf, w)
        j = int(np.argmax(cand))
        if cand[j] <= tol:
            break
        it += 1
        if it > max_iter:
            raise ConvergenceError("Lawson-Hanson iteration cap exceeded", partial=h.copy(), iteration=it)
        passive[j] = True
        while True:
            s = np.zeros(n)
            s[passive] = np.linalg.lstsq(W[:, passive], x, rcond=None)[0]
            if s[passive].min() > 0:
                break
            it += 1
            if it > max_iter:
                raise ConvergenceError("Lawson-Hanson iteration cap exceeded", partial=h.copy(), iteration=it)
            mask = passive & (s <= 0)
            alpha = np.min(h[mask] / (h[mask] - s[mask]))
            h = h + alpha * (s - h)
            passive &= h > tol
            h[~passive] = 0.0
        h = s
        w = W.T @ (x - W @ h)
    return h


def nn_bomp(x, W, blocks, k):
    """Non-negative block OMP.

    Each round picks the unselected block with the largest
    ``||max(W_b^T r, 0)||_2`` and refits the coefficients on the union of
    selected blocks with :func:`nnls_active_set`.  Singleton blocks give
    non-negative OMP.  Stops early if no block correlates positively with
    the residual.

    Returns
    -------
    support : SupportSet
        Selected block ids in selection order.
    h : ndarray, shape (n,)
    """
    W = check_nonneg(W, "W")
    x = np.asarray(x, dtype=np.float64).ravel()
    if W.shape[0] != x.shape[0]:
        raise ShapeMismatchError(f"W {W.shape} incompatible with x {x.shape}", W.shape, x.shape)
    if blocks is None:
        blocks = BlockStructure.contiguous(W.shape[1], 1)
    if blocks.n != W.shape[1]:
        raise ValidationError(f"block structure covers {blocks.n} atoms, W has {W.shape[1]}")
    if not 1 <= k <= blocks.n_blocks:
        raise ValidationError(f"k must be in [1, {blocks.n_blocks}], got {k}")

    n = W.shape[1]
    h = np.zeros(n)
    r = x.copy()
    selected = []
    history = [float(np.linalg.norm(r))]
    available = np.ones(blocks.n_blocks, dtype=bool)
    for _ in range(k):
        corr = np.maximum(W.T @ r, 0.0)
        score = np.sqrt(blocks.block_values(corr, "l2sq")[:, 0])
        score[~available] = -np.inf
        b = int(np.argmax(score))
        if not score[b] > 0:
            break
        available[b] = False
        selected.append(b)
        cols = np.sort(np.concatenate([blocks.groups[i] for i in selected]))
        h = np.zeros(n)
        h[cols] = nnls_active_set(x, W[:, cols])
        r = x - W @ h
        history.append(float(np.linalg.norm(r)))
    return SupportSet(tuple(selected), history[-1], history), h


def nn_bomp_matrix(X, W, blocks, k):
    """Column-wise :func:`nn_bomp`; returns ``H`` of shape ``(n, m)``."""
    X = check_nonneg(X, "X")
    return np.column_stack([nn_bomp(X[:, j], W, blocks, k)[1] for j in range(X.shape[1])])


def nnls_matrix(X, W):
    X = check_nonneg(X, "X")
    W = check_nonneg(W, "W")
    return np.column_stack([nnls_active_set(X[:, j], W) for j in range(X.shape[1])])


def topk_refine(Hhat, k, X, W, *, conv_tol=1e-9, max_iter=20000, floor=DEFAULT_FLOOR):
    """Keep the ``k`` largest entries per column, then refit the support.

    The refit runs the plain multiplicative NMF update for ``H`` (which
    cannot revive zeroed entries) until no entry changes by more than
    ``conv_tol`` relatively, or ``max_iter`` sweeps.
    """
    Hhat = check_nonneg(Hhat, "Hhat")
    X = check_nonneg(X, "X")
    W = check_nonneg(W, "W")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if Hhat.shape != (W.shape[1], X.shape[1]):
        raise ShapeMismatchError("Hhat does not match W and X", Hhat.shape, W.shape, X.shape)
    H = Hhat.copy()
    if k < H.shape[0]:
        order = np.argsort(-H, axis=0, kind="stable")
        np.put_along_axis(H, order[k:], 0.0, axis=0)
    return _refit(H, X, W, conv_tol, max_iter, floor)


def topk_block_refine(Hhat, k, X, W, blocks, *, conv_tol=1e-9, max_iter=20000, floor=DEFAULT_FLOOR):
    """Block version of :func:`topk_refine`: keep the ``k`` blocks of largest
    l2 norm per column, then refit them with the plain multiplicative rule."""
    Hhat = check_nonneg(Hhat, "Hhat")
    X = check_nonneg(X, "X")
    W = check_nonneg(W, "W")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if Hhat.shape != (W.shape[1], X.shape[1]):
        raise ShapeMismatchError("Hhat does not match W and X", Hhat.shape, W.shape, X.shape)
    H = Hhat.copy()
    if k < blocks.n_blocks:
        energy = blocks.block_values(H, "l2sq")
        order = np.argsort(-energy, axis=0, kind="stable")
        dropped = np.zeros_like(energy, dtype=bool)
        np.put_along_axis(dropped, order[k:], True, axis=0)
        H[dropped[blocks.block_of]] = 0.0
    return _refit(H, X, W, conv_tol, max_iter, floor)


def _refit(H, X, W, conv_tol, max_iter, floor):
    """Plain multiplicative updates on the support of ``H``.

    Only the ``(k, k)`` Gram block of each column's support is touched, so
    a sweep costs ``O(m k^2)`` rather than ``O(n^2 m)``.  Entries outside
    the support are zero and stay zero under the rule, so this is the same
    iteration as on the full matrix.
    """
    n, m = H.shape
    k = int(np.max(np.count_nonzero(H, axis=0))) if H.size else 0
    if k == 0:
        return H
    # per column: indices of its support, padded with zero-valued rows
    order = np.argsort(H == 0, axis=0, kind="stable")[:k]
    cols = np.arange(m)
    G = (W.T @ W)[order.T[:, :, None], order.T[:, None, :]]
    b = (W.T @ X)[order, cols].T
    h = H[order, cols].T
    for _ in range(max_iter):
        den = np.einsum("jab,jb->ja", G, h)
        new = h * b / np.maximum(den, floor)
        done = np.all(np.abs(new - h) <= conv_tol * h)
        h = new
        if done:
            break
    out = np.zeros_like(H)
    out[order, cols] = h.T
    return out
