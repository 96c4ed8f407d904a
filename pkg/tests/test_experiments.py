import math

import numpy as np
import pytest
from scipy import stats

from sparsemur.blocksparse import BlockStructure
from sparsemur.exceptions import ValidationError
from sparsemur.experiments import (
    SolverEntry,
    TrialSpec,
    anneal_driver,
    gen_dictionary,
    gen_sparse_codes,
    make_problem,
    relative_error,
    run_recovery_suite,
    sweep,
)
from sparsemur.priors import PriorSpec
from sparsemur.snnls import AnnealSchedule, SolverConfig, snnls_solve


def test_dictionary_properties():
    W = gen_dictionary(30, 50, 3)
    assert np.all(W >= 0)
    np.testing.assert_allclose(np.linalg.norm(W, axis=0), 1.0, atol=1e-12)
    assert np.array_equal(W, gen_dictionary(30, 50, 3))
    with pytest.raises(ValidationError):
        gen_dictionary(0, 3, 1)


def test_half_normal_mean():
    rng = np.random.default_rng(11)
    draws = np.abs(rng.standard_normal(100_000))
    assert draws.mean() == pytest.approx(math.sqrt(2 / math.pi), rel=0.01)


def test_codes_support_and_norm():
    H = gen_sparse_codes(40, 25, 6, 0)
    assert np.all(np.sum(H > 0, axis=0) == 6)
    np.testing.assert_allclose(np.linalg.norm(H, axis=0), 1.0, atol=1e-12)
    b = BlockStructure.contiguous(40, 8)
    Hb = gen_sparse_codes(40, 25, 2, 0, b)
    assert np.all(np.sum(Hb > 0, axis=0) == 16)
    energy = b.block_values(Hb, "l2sq")
    assert np.all(np.sum(energy > 0, axis=0) == 2)
    assert np.all(gen_sparse_codes(5, 3, 0, 0) == 0)
    with pytest.raises(ValidationError):
        gen_sparse_codes(5, 3, 6, 0)


def test_support_uniformity():
    n = 20
    H = gen_sparse_codes(n, 10_000, 1, 5)
    counts = np.bincount(np.argmax(H, axis=0), minlength=n)
    assert stats.chisquare(counts).pvalue > 0.01


def test_problem_noiseless_and_deterministic():
    W, H, X = make_problem(20, 30, 5, 3, seed=1, trial=2)
    assert np.linalg.norm(X - W @ H) == 0.0
    W2, H2, X2 = make_problem(20, 30, 5, 3, seed=1, trial=2)
    assert np.array_equal(X, X2)
    W3, _, _ = make_problem(20, 30, 5, 3, seed=1, trial=3)
    assert not np.array_equal(W, W3)


def test_relative_error():
    H = np.eye(3)
    assert relative_error(H, H) == 0.0
    assert relative_error(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
    assert relative_error(H, 2 * H) == pytest.approx(1.0)


def test_spec_validation():
    with pytest.raises(ValidationError):
        TrialSpec(n=10, k=11)
    with pytest.raises(ValidationError):
        TrialSpec(n=16, block_size=8, k=3)
    with pytest.raises(ValidationError):
        SolverEntry("x", "snnls")
    with pytest.raises(ValidationError):
        SolverEntry("x", "magic")


SMALL = (
    SolverEntry("rl1", "snnls", "rgdp", tau=0.1, lambdas=(1e-3, 1e-2), inner_iters=20, outer_cap=20),
    SolverEntry("l1", "l1_mur", lambdas=(1e-3,), inner_iters=20, outer_cap=20),
    SolverEntry("omp", "nn_omp"),
    SolverEntry("nnls", "nnls_topk"),
)


def test_suite_report_and_determinism():
    spec = TrialSpec(d=20, n=30, m=4, k=3, trials=2, solvers=SMALL, seed=4)
    a = run_recovery_suite(spec)
    b = run_recovery_suite(spec)
    assert a == b
    names = [r["solver"] for r in a["rows"]]
    assert names == ["rl1", "l1", "omp", "nnls"]
    for r in a["rows"]:
        assert r["failures"] == 0
        assert 0 <= r["error_mean"]
        assert "time_mean" not in r
    assert a["rows"][0]["lambda"] in (1e-3, 1e-2)
    assert a["rows"][2]["lambda"] is None


def test_suite_parallel_matches_serial():
    spec = TrialSpec(d=20, n=30, m=4, k=3, trials=2, solvers=SMALL[:2], seed=4)
    assert run_recovery_suite(spec, jobs=2) == run_recovery_suite(spec, jobs=1)


def test_zero_sparsity_is_trivial():
    spec = TrialSpec(d=10, n=15, m=3, k=0, trials=1, solvers=SMALL)
    for r in run_recovery_suite(spec)["rows"]:
        assert r["error_mean"] == 0.0


def test_block_suite_and_sweep():
    solvers = (
        SolverEntry("brgdp", "snnls", "block_rgdp", lambdas=(1e-3,), inner_iters=20, outer_cap=20),
        SolverEntry("bomp", "nn_bomp"),
    )
    spec = TrialSpec(d=16, n=24, m=3, k=1, block_size=4, trials=1, solvers=solvers)
    rep = sweep(spec, k_values=[1, 2])
    assert [(r["solver"], r["k"]) for r in rep["rows"]] == [("brgdp", 1), ("bomp", 1), ("brgdp", 2), ("bomp", 2)]


def test_solver_failure_is_recorded(monkeypatch):
    import sparsemur.experiments as ex

    def boom(*a, **k):
        raise ArithmeticError("boom")

    monkeypatch.setattr(ex, "nnls_matrix", boom)
    spec = TrialSpec(d=10, n=15, m=2, k=2, trials=2, solvers=(SolverEntry("nnls", "nnls_topk"),))
    row = run_recovery_suite(spec)["rows"][0]
    assert row["failures"] == 2
    assert math.isnan(row["error_mean"])
    assert "boom" in row["failure_messages"][0]


def test_anneal_driver():
    W, H, X = make_problem(20, 40, 3, 3, seed=0, trial=0)
    sched = AnnealSchedule(max_steps=2, trigger_scale=0.1)
    res = anneal_driver(X, W, sched, config=SolverConfig(lam=1e-3, inner_iters=10, outer_cap=200))
    assert res.tau_history[0] == 1.0
    assert set(res.tau_history) <= set(sched.taus())
    plain = snnls_solve(X, W, prior=PriorSpec("rst", 1.0), config=SolverConfig(lam=1e-3, inner_iters=10, outer_cap=50))
    off = anneal_driver(X, W, AnnealSchedule(max_steps=0), config=SolverConfig(lam=1e-3, inner_iters=10, outer_cap=50))
    assert np.array_equal(plain.H, off.H)
