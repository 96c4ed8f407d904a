import numpy as np
import pytest

from conftest import random_problem
from sparsemur.diagnostics import kkt_residual, q_function, sparsity_profile, tau_condition
from sparsemur.exceptions import NegativeEntryError, ShapeMismatchError
from sparsemur.priors import PriorSpec, penalty_gradient
from sparsemur.snnls import objective


def test_kkt_at_zero():
    X, W = random_problem(0)
    p = PriorSpec("rgdp", 0.1)
    lam = 0.2
    H = np.zeros((8, 3))
    rep = kkt_residual(X, W, H, p, lam)
    expected = np.minimum(0.0, -(W.T @ X) + lam * penalty_gradient(p, H))
    np.testing.assert_array_equal(rep.residual_matrix, expected)
    assert rep.normalized_norm == pytest.approx(np.mean(np.abs(expected)))
    big = kkt_residual(X, W, H, p, 1e3)
    assert big.normalized_norm == 0.0


def test_kkt_errors():
    X, W = random_problem(0)
    with pytest.raises(NegativeEntryError):
        kkt_residual(X, W, -np.ones((8, 3)), PriorSpec("rst"), 0.1)
    with pytest.raises(ShapeMismatchError):
        kkt_residual(X, W, np.ones((7, 3)), PriorSpec("rst"), 0.1)


def test_report_serializes():
    X, W = random_problem(0)
    d = kkt_residual(X, W, np.ones((8, 3)), PriorSpec("rgdp"), 0.1).to_dict()
    assert set(d) == {"normalized_norm", "max_abs", "shape", "condition_flags"}
    assert d["condition_flags"]["tau_lambda_condition"] in (True, False)


def test_tau_condition():
    WtX = np.array([[2.0]])
    assert tau_condition(PriorSpec("rgdp", 0.05), WtX, 0.1) is True
    assert tau_condition(PriorSpec("rgdp", 0.5), WtX, 0.1) is False
    assert tau_condition(PriorSpec("rst", 0.05), WtX, 0.1) is None


def test_sparsity_profile():
    H = np.zeros((6, 4))
    H[:2] = [[3, 1, 2, 5], [1, 1, 4, 5]]
    prof = sparsity_profile(H)
    assert np.all(prof.curve[2:] == 0) and prof.curve[1] > 0
    np.testing.assert_array_equal(prof.counts, [2, 2, 2, 2])
    flat = sparsity_profile(np.full((5, 3), 0.7))
    np.testing.assert_allclose(flat.curve, 0.7)
    perm = sparsity_profile(H[::-1])
    np.testing.assert_array_equal(perm.curve, prof.curve)
    assert prof.mean_count == 2.0


def test_q_function_lambda_zero():
    X, W = random_problem(1)
    H = np.ones((8, 3))
    assert q_function(H, 2 * H, X, W, PriorSpec("rst"), 0.0) == pytest.approx(np.sum((X - W @ H) ** 2), rel=0)


def test_q_at_current_point_equals_objective():
    X, W = random_problem(2)
    Ht = np.random.default_rng(0).random((8, 3)) + 0.1
    for p in (PriorSpec("rst", 0.3), PriorSpec("rgdp", 0.3), PriorSpec("exponential")):
        assert q_function(Ht, Ht, X, W, p, 0.1) == pytest.approx(objective(X, W, Ht, p, 0.1), rel=1e-14)
    with pytest.raises(ShapeMismatchError):
        q_function(Ht, Ht[:, :2], X, W, PriorSpec("rst"), 0.1)
