"""Block-sparse bookkeeping and the block multiplicative update."""
from __future__ import annotations

import numpy as np

from .exceptions import ValidationError
from .priors import weight_matrix
from .snnls import mur_step

_MODES = ("l2sq", "l1")


class BlockStructure:
    """Disjoint partition of the row indices ``0..n-1`` of ``H`` into groups.

    Parameters
    ----------
    groups : sequence of sequences of int
        Pairwise disjoint, non-empty, covering ``range(n)`` exactly.

    Attributes
    ----------
    groups : tuple of tuple of int
    block_of : ndarray of int, shape (n,)
        Block id of every row.
    """

    def __init__(self, groups):
        groups = tuple(tuple(int(i) for i in g) for g in groups)
        if not groups:
            raise ValidationError("block structure needs at least one group")
        if any(len(g) == 0 for g in groups):
            raise ValidationError("empty group in block structure")
        flat = [i for g in groups for i in g]
        n = len(flat)
        if len(set(flat)) != n:
            raise ValidationError("groups overlap")
        if sorted(flat) != list(range(n)):
            raise ValidationError(f"groups must cover exactly 0..{n - 1}")
        block_of = np.empty(n, dtype=np.intp)
        for b, g in enumerate(groups):
            block_of[list(g)] = b
        self.groups = groups
        self.block_of = block_of
        self._order = np.asarray(flat, dtype=np.intp)
        self._starts = np.cumsum([0] + [len(g) for g in groups[:-1]]).astype(np.intp)

    @classmethod
    def contiguous(cls, n, size):
        """Consecutive blocks of ``size`` rows; the last may be shorter."""
        if n < 1 or size < 1:
            raise ValidationError(f"need n >= 1 and size >= 1, got n={n}, size={size}")
        return cls([range(s, min(s + size, n)) for s in range(0, n, size)])

    @classmethod
    def from_list(cls, groups):
        return cls(groups)

    def to_list(self):
        return [list(g) for g in self.groups]

    @property
    def n(self):
        return len(self.block_of)

    @property
    def n_blocks(self):
        return len(self.groups)

    def __len__(self):
        return self.n_blocks

    def __eq__(self, other):
        return isinstance(other, BlockStructure) and self.groups == other.groups

    def __hash__(self):
        return hash(self.groups)

    def __repr__(self):
        return f"BlockStructure(n={self.n}, n_blocks={self.n_blocks})"

    def _check_rows(self, H):
        if H.shape[0] != self.n:
            raise ValidationError(f"block structure covers {self.n} rows but H has {H.shape[0]}")

    def block_values(self, H, mode):
        """Per-block statistic, shape ``(n_blocks, m)``."""
        if mode not in _MODES:
            raise ValidationError(f"mode must be one of {_MODES}, got {mode!r}")
        H = np.asarray(H, dtype=np.float64)
        if H.ndim == 1:
            H = H.reshape(-1, 1)
        self._check_rows(H)
        vals = H * H if mode == "l2sq" else H
        # fixed summation order: rows of each group in the order given
        return np.add.reduceat(vals[self._order], self._starts, axis=0)

    def stats(self, H, mode):
        """Per-block statistic broadcast back to every row, shape ``(n, m)``."""
        return self.block_values(H, mode)[self.block_of]


def block_stats(H, blocks, mode):
    """Broadcast blockwise ``||.||_2^2`` (``mode="l2sq"``) or ``||.||_1`` (``"l1"``)."""
    return blocks.stats(H, mode)


def block_mur_step(W, X, Hs, blocks, prior, lam, active=None, *, Ht=None, floor=1e-12):
    """One block-prior multiplicative update.

    ``Phi`` is built from ``Ht`` (the current EM iterate, defaulting to
    ``Hs``) and the update is otherwise identical to
    :func:`sparsemur.snnls.mur_step`.
    """
    if not prior.is_block:
        raise ValidationError(f"block_mur_step needs a block prior, got {prior.family!r}")
    if prior.blocks != blocks:
        raise ValidationError("prior.blocks does not match the given block structure")
    phi = weight_matrix(prior, Hs if Ht is None else Ht)
    return mur_step(W, X, Hs, phi, prior.z, lam, active, floor=floor)
