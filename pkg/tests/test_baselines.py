import numpy as np
import pytest
from scipy.optimize import nnls as scipy_nnls

from oracles import projected_gradient
from sparsemur.baselines import (
    SupportSet,
    nn_bomp,
    nn_bomp_matrix,
    nnls_active_set,
    topk_block_refine,
    topk_refine,
)
from sparsemur.blocksparse import BlockStructure
from sparsemur.exceptions import ConvergenceError, ValidationError
from sparsemur.priors import PriorSpec


def test_identity_dictionary():
    x = np.array([1.0, 0.0, 2.0])
    np.testing.assert_allclose(nnls_active_set(x, np.eye(3)), x)


def test_infeasible_direction():
    w = np.array([[1.0], [2.0]])
    assert nnls_active_set(-w[:, 0], w)[0] == 0.0


def test_matches_projected_gradient_and_scipy():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        W = rng.random((6, 4)) + 0.1
        x = rng.standard_normal(6)
        h = nnls_active_set(x, W)
        Hp, _ = projected_gradient(x[:, None], W, PriorSpec("noninformative"), 0.0, np.ones((4, 1)))
        np.testing.assert_allclose(h, Hp[:, 0], atol=1e-6)
        np.testing.assert_allclose(h, scipy_nnls(W, x)[0], atol=1e-10)


def test_complementary_slackness():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        W = rng.random((20, 40))
        x = rng.random(20)
        h = nnls_active_set(x, W)
        g = W.T @ W @ h - W.T @ x
        assert np.all(np.abs(h * g) <= 1e-8)
        assert np.all(g >= -1e-8)


def test_iteration_cap_reports_partial():
    rng = np.random.default_rng(0)
    W = rng.random((10, 30))
    x = rng.standard_normal(10)
    with pytest.raises(ConvergenceError) as exc:
        nnls_active_set(x, W, max_iter=0)
    assert exc.value.partial is not None
    assert np.all(exc.value.partial >= 0)


def test_bomp_two_block_recovery():
    rng = np.random.default_rng(3)
    W = rng.random((30, 12))
    blocks = BlockStructure.contiguous(12, 3)
    h = np.zeros(12)
    h[3:6] = [0.5, 1.0, 0.2]
    h[9:12] = [1.0, 0.3, 0.7]
    x = W @ h
    support, est = nn_bomp(x, W, blocks, 2)
    assert set(support.indices) == {1, 3}
    assert support.residual_norm <= 1e-8
    np.testing.assert_allclose(est, h, atol=1e-8)


def test_bomp_full_support_equals_nnls():
    rng = np.random.default_rng(4)
    W = rng.random((8, 10))
    x = rng.random(8)
    blocks = BlockStructure.contiguous(10, 2)
    support, h = nn_bomp(x, W, blocks, 5)
    full = nnls_active_set(x, W)
    if len(support.indices) == 5:
        assert np.linalg.norm(x - W @ h) == pytest.approx(np.linalg.norm(x - W @ full), abs=1e-10)


def test_bomp_residual_nonincreasing_and_omp_equivalence():
    rng = np.random.default_rng(5)
    W = rng.random((20, 30))
    x = rng.random(20)
    s, h = nn_bomp(x, W, BlockStructure.contiguous(30, 1), 6)
    s2, h2 = nn_bomp(x, W, None, 6)
    assert s.indices == s2.indices and np.array_equal(h, h2)
    hist = np.array(s.residual_history)
    assert np.all(np.diff(hist) <= 1e-12)
    assert len(set(s.indices)) == len(s.indices)
    with pytest.raises(ValidationError):
        nn_bomp(x, W, None, 31)
    with pytest.raises(ValidationError):
        nn_bomp(x, W, None, 0)


def test_omp_low_k_regime():
    from sparsemur.experiments import make_problem

    W, H, X = make_problem(100, 400, 20, 10, seed=0, trial=0)
    est = nn_bomp_matrix(X, W, None, 10)
    col_err = np.linalg.norm(est - H, axis=0) / np.linalg.norm(H, axis=0)
    # greedy selection recovers most columns exactly; the misses stay small
    assert np.mean(col_err <= 1e-8) >= 0.5
    assert np.mean(col_err) < 0.1


def test_support_set_unique():
    with pytest.raises(ValidationError):
        SupportSet((1, 1), 0.0)


def test_topk_refine_properties():
    rng = np.random.default_rng(6)
    W = rng.random((10, 15))
    H = np.zeros((15, 3))
    H[[1, 4, 7], :] = rng.random((3, 3)) + 0.5
    X = W @ H
    out = topk_refine(H, 3, X, W)
    np.testing.assert_allclose(out, H, atol=1e-7)
    noisy = H + 0.01 * rng.random(H.shape)
    out = topk_refine(noisy, 2, X, W)
    assert np.all(np.sum(out > 0, axis=0) <= 2)
    with pytest.raises(ValidationError):
        topk_refine(H, 0, X, W)


def test_topk_one_atom_closed_form():
    rng = np.random.default_rng(7)
    W = rng.random((6, 4))
    x = rng.random((6, 1))
    Hhat = np.array([[0.1], [5.0], [0.2], [0.0]])
    out = topk_refine(Hhat, 1, x, W)
    w = W[:, 1]
    assert out[1, 0] == pytest.approx(max(w @ x[:, 0] / (w @ w), 0.0), rel=1e-8)
    assert np.count_nonzero(out) == 1


def test_topk_block_refine():
    rng = np.random.default_rng(8)
    W = rng.random((12, 8))
    b = BlockStructure.contiguous(8, 2)
    H = np.zeros((8, 2))
    H[2:4] = 1.0
    X = W @ H
    noisy = H + 0.05 * rng.random(H.shape)
    out = topk_block_refine(noisy, 1, X, W, b)
    assert np.all(out[[0, 1, 4, 5, 6, 7]] == 0)
    np.testing.assert_allclose(out, H, atol=1e-6)
