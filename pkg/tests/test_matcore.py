import numpy as np
import pytest

from sparsemur.exceptions import NegativeEntryError, ShapeMismatchError, ValidationError
from sparsemur.matcore import check_nonneg, gemm, hadamard_quotient, normalize_columns, rel_frobenius_error


def test_check_nonneg_accepts_lists_and_reshapes_vectors():
    M = check_nonneg([1.0, 2.0, 0.0], "x")
    assert M.shape == (3, 1)
    assert M.dtype == np.float64


def test_check_nonneg_reports_location():
    with pytest.raises(NegativeEntryError) as exc:
        check_nonneg([[1.0, 2.0], [3.0, -0.5]], "W")
    assert (exc.value.row, exc.value.col) == (1, 1)
    assert "W" in str(exc.value)


@pytest.mark.parametrize("bad", [[[np.nan]], [[np.inf, 1.0]], [["a"]]])
def test_check_nonneg_rejects_non_finite(bad):
    with pytest.raises(ValidationError):
        check_nonneg(bad)


def test_gemm_matches_numpy_and_is_deterministic(rng):
    A = rng.random((5, 4))
    B = rng.random((5, 3))
    C1 = gemm(A, B, transpose_a=True)
    C2 = gemm(A, B, transpose_a=True)
    assert np.array_equal(C1, C2)
    np.testing.assert_allclose(C1, A.T @ B, rtol=1e-14)


def test_gemm_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        gemm(np.ones((2, 3)), np.ones((2, 3)))


def test_hadamard_quotient_floor():
    out = hadamard_quotient(np.array([[1.0, 2.0]]), np.array([[0.0, 4.0]]), floor=1e-3)
    np.testing.assert_array_equal(out, [[1000.0, 0.5]])
    with pytest.raises(ValidationError):
        hadamard_quotient(np.ones((1, 1)), np.ones((1, 1)), floor=0.0)
    with pytest.raises(ShapeMismatchError):
        hadamard_quotient(np.ones((1, 2)), np.ones((2, 1)))


def test_rel_frobenius_error():
    H = np.array([[3.0, 4.0]])
    assert rel_frobenius_error(H, H) == 0.0
    assert rel_frobenius_error(H, np.zeros_like(H)) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        rel_frobenius_error(np.zeros((2, 2)), np.ones((2, 2)))


def test_normalize_columns_round_trip(rng):
    M = rng.random((4, 3))
    M[:, 1] = 0.0
    N, s = normalize_columns(M)
    np.testing.assert_allclose(np.linalg.norm(N[:, [0, 2]], axis=0), 1.0, atol=1e-15)
    assert s[1] == 0.0
    np.testing.assert_allclose(N * s, M, rtol=1e-15)
