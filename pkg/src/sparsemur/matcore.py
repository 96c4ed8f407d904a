"""Dense matrix kernels shared by every solver.

Matrices are plain ``float64`` ndarrays.  ``check_nonneg`` is the gate that
turns arbitrary array-likes into the validated non-negative matrices the
solvers expect (finite, 2-D, every entry >= 0).
"""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import NegativeEntryError, ShapeMismatchError, ValidationError

DEFAULT_FLOOR = 1e-12


def check_nonneg(M, name="matrix", *, ensure_2d=True, copy=False):
    """Validate ``M`` as a finite non-negative float64 matrix.

    Parameters
    ----------
    M : array-like
        Input data. 1-D input is reshaped to a column when ``ensure_2d``
        is True.
    name : str
        Used in error messages.

    Returns
    -------
    ndarray of float64

    Raises
    ------
    NegativeEntryError
        With the (row, col) of the first negative entry.
    ValidationError
        For NaN/Inf or non-numeric input.
    """
    arr = np.asarray(M)
    if ensure_2d and arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    try:
        arr = check_array(
            arr,
            dtype=np.float64,
            ensure_2d=ensure_2d,
            ensure_all_finite=True,
            ensure_min_samples=1,
            ensure_min_features=1,
            copy=copy,
            input_name=name,
        )
    except ValueError as exc:
        raise ValidationError(f"{name}: {exc}") from exc
    neg = np.argwhere(arr < 0)
    if neg.size:
        loc = tuple(neg[0]) if arr.ndim == 2 else (neg[0][0], 0)
        raise NegativeEntryError(name, loc[0], loc[1], arr[tuple(neg[0])])
    return arr


def _check_same_shape(A, B, what):
    if A.shape != B.shape:
        raise ShapeMismatchError(
            f"{what}: shapes {A.shape} and {B.shape} differ", A.shape, B.shape
        )


def gemm(A, B, transpose_a=False):
    """Dense product ``A @ B`` (or ``A.T @ B``).

    Repeated calls on identical inputs return bit-identical results.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    left = A.T if transpose_a else A
    if left.ndim != 2 or B.ndim != 2 or left.shape[1] != B.shape[0]:
        op = "A^T" if transpose_a else "A"
        raise ShapeMismatchError(
            f"gemm: inner dimensions disagree for {op} {left.shape} x B {B.shape}",
            A.shape,
            B.shape,
        )
    return left @ B


def hadamard_quotient(N, D, floor=DEFAULT_FLOOR):
    """Element-wise ``N / max(D, floor)``."""
    N = np.asarray(N, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    _check_same_shape(N, D, "hadamard_quotient")
    if not floor > 0:
        raise ValidationError(f"floor must be positive, got {floor!r}")
    return N / np.maximum(D, floor)


def rel_frobenius_error(H, Hhat):
    """``||H - Hhat||_F / ||H||_F``."""
    H = np.asarray(H, dtype=np.float64)
    Hhat = np.asarray(Hhat, dtype=np.float64)
    _check_same_shape(H, Hhat, "rel_frobenius_error")
    ref = np.linalg.norm(H)
    if ref == 0:
        raise ValidationError("reference matrix has zero Frobenius norm")
    return float(np.linalg.norm(H - Hhat) / ref)


def normalize_columns(M):
    """Scale every nonzero column of ``M`` to unit l2 norm.

    Returns
    -------
    normalized : ndarray
    scales : ndarray
        Original column norms; zero columns are left untouched and get
        scale 0, so ``normalized * scales`` reproduces ``M``.
    """
    M = np.asarray(M, dtype=np.float64)
    scales = np.linalg.norm(M, axis=0)
    safe = np.where(scales > 0, scales, 1.0)
    return M / safe, scales
