import warnings

import numpy as np
import pytest

from quasisparse import penalty
from quasisparse.errors import ParameterError
from quasisparse.experiments import ExperimentSpec, generate_problem, relative_error, trial_seed
from quasisparse.operators import LinearOperator, LogShiftOperator, evaluate_matrix
from quasisparse.solvers import (
    Algorithm,
    LambdaRegime,
    RecoveryResult,
    SolverConfig,
    Termination,
    adaptive_lambda,
    fixed_point_residual,
    ifta_solve,
    ihta_solve,
    ista_solve,
    keep_top_r,
    soft_threshold,
    solve,
)


def problem(seed, r, eta=0.003):
    spec = ExperimentSpec(eta=eta)
    return generate_problem(trial_seed(0, r, seed), spec, r)


def test_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(epsilon=1.0)
    with pytest.raises(ParameterError):
        SolverConfig(tol=0)
    with pytest.raises(ParameterError):
        SolverConfig(sparsity_prior_r=0)
    with pytest.raises(ParameterError):
        SolverConfig(a=-1)
    assert SolverConfig(algorithm="ista").algorithm is Algorithm.ISTA


def test_adaptive_lambda_super_critical():
    st = adaptive_lambda(1, 1, [4, 3, 2, 1], 2)
    # lam1 = 4 > 1 so the second regime applies
    assert st.regime is LambdaRegime.LAMBDA2
    assert st.lam == pytest.approx(12.25)
    assert st.threshold == pytest.approx(3.0)
    mags = np.array([4, 3, 2, 1])
    # the r-th magnitude sits exactly on the threshold and is annihilated
    assert np.count_nonzero(mags >= st.threshold) == 2
    assert np.count_nonzero(mags > st.threshold) == 1


def test_adaptive_lambda_sub_critical():
    st = adaptive_lambda(1, 1, [0.4, 0.3, 0.002, 0.001], 2)
    assert st.regime is LambdaRegime.LAMBDA1
    assert st.lam == pytest.approx(0.004)
    assert st.threshold == pytest.approx(0.002)
    out = penalty.prox_vector(penalty.PenaltyParams(1, st.lam), [0.4, 0.3, 0.002, 0.001])
    assert np.count_nonzero(out) == 2


def test_adaptive_lambda_exact_sparsity():
    st = adaptive_lambda(1, 0.5, [1.0, -2.0, 0, 0], 2)
    assert st.lam == 0
    assert st.threshold == 0
    with pytest.raises(IndexError):
        adaptive_lambda(1, 1, [1, 2], 2)


def test_adaptive_lambda_ties_use_values_only():
    st = adaptive_lambda(1, 1, [0.1, -0.1, 0.1, 0.05], 2)
    assert st.lam == pytest.approx(0.2)


def test_soft_threshold():
    z = np.array([3.0, -1.0, 0.5])
    np.testing.assert_array_equal(soft_threshold(z, 0), z)
    np.testing.assert_array_equal(soft_threshold(z, 1), [2, 0, 0])


def test_keep_top_r():
    np.testing.assert_array_equal(keep_top_r([5, -4, 1], 2), [5, -4, 0])
    np.testing.assert_array_equal(keep_top_r([1, 2, 3], 3), [1, 2, 3])
    np.testing.assert_array_equal(keep_top_r([1, -1, 1], 1), [1, 0, 0])


def test_identity_embedded_one_sparse():
    A = np.hstack([np.eye(5), np.zeros((5, 5))])
    op = LogShiftOperator(A, np.zeros(10), eta=0.0)
    x_true = np.zeros(10)
    x_true[2] = 1.7
    res = ifta_solve(op, A @ x_true, SolverConfig(sparsity_prior_r=1))
    assert res.termination is Termination.CONVERGED
    assert relative_error(res.solution, x_true) <= 1e-4


def test_zero_data_zero_start():
    op, _, _ = problem(0, 3)
    for solver in (ifta_solve, ista_solve, ihta_solve):
        res = solver(op, np.zeros(30), SolverConfig(sparsity_prior_r=3), np.zeros(100))
        assert res.iterations <= 1
        assert res.termination is Termination.CONVERGED
        np.testing.assert_array_equal(res.solution, 0)
        assert res.fixed_point_residual == 0


def test_ifta_recovers_r5_majority():
    wins = 0
    for i in range(10):
        op, x_true, b = problem(i, 5)
        res = ifta_solve(op, b, SolverConfig(sparsity_prior_r=5))
        wins += relative_error(res.solution, x_true) <= 1e-4
    assert wins > 5


def test_max_iter_termination():
    op, _, b = problem(1, 8)
    res = ifta_solve(op, b, SolverConfig(sparsity_prior_r=8, max_iter=3))
    assert res.termination is Termination.MAX_ITER
    assert res.iterations == 3
    assert len(res.lambda_trace) == 3


def test_ihta_support_size():
    op, _, b = problem(2, 4)
    res = ihta_solve(op, b, SolverConfig(sparsity_prior_r=4))
    assert np.count_nonzero(res.solution) <= 4


def test_trace_invariants():
    """Per-iteration support control, threshold order and step-size contract."""
    op, _, b = problem(3, 5)
    cfg = SolverConfig(sparsity_prior_r=5, epsilon=0.01)
    seen = []

    def cb(rec, anchor):
        seen.append((rec, anchor.copy()))

    res = ifta_solve(op, b, cfg, callback=cb)
    assert len(seen) == res.iterations
    iterates = [a for _, a in seen[1:]] + [res.solution]
    for (rec, anchor), x_next in zip(seen, iterates):
        F = evaluate_matrix(op, anchor)
        sigma_sq = np.linalg.svd(F, compute_uv=False)[0] ** 2
        assert rec.mu * sigma_sq == pytest.approx(1 - cfg.epsilon, rel=1e-6)
        assert rec.nnz == np.count_nonzero(x_next)
        if rec.regime == LambdaRegime.LAMBDA2.value:
            assert rec.nnz <= 5
        z = anchor + rec.mu * F.T @ (b - F @ anchor)
        assert np.all(x_next[np.abs(z) <= rec.t_star] == 0)
        if rec.lam:
            lm = rec.lam * rec.mu
            assert penalty.threshold_super(1, lm) <= penalty.threshold_sub(1, lm) + 1e-12


def test_determinism():
    op, _, b = problem(4, 6)
    cfg = SolverConfig(sparsity_prior_r=6)
    r1, r2 = ifta_solve(op, b, cfg), ifta_solve(op, b, cfg)
    assert r1.iterations == r2.iterations
    np.testing.assert_array_equal(r1.solution, r2.solution)


@pytest.mark.parametrize("seed", range(3))
def test_linear_limit_equivalence(seed):
    op, _, b = problem(seed, 4, eta=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lin = LinearOperator(op.A1)
    cfg = SolverConfig(sparsity_prior_r=4, max_iter=300)
    a_iters, b_iters = [], []
    ifta_solve(op, b, cfg, callback=lambda rec, x: a_iters.append(x.copy()))
    ifta_solve(lin, b, cfg, callback=lambda rec, x: b_iters.append(x.copy()))
    assert len(a_iters) == len(b_iters)
    for xa, xb in zip(a_iters, b_iters):
        assert np.max(np.abs(xa - xb)) <= 1e-12


def test_objective_recorded():
    op, _, b = problem(5, 4)
    cfg = SolverConfig(sparsity_prior_r=4, max_iter=40)
    res = ifta_solve(op, b, cfg)
    x = res.solution
    F = evaluate_matrix(op, x)
    lam = res.lambda_trace[-1][0]
    expected = np.sum((F @ x - b) ** 2) + lam * penalty.penalty(1.0, x)
    assert res.objective == pytest.approx(expected, rel=1e-10, abs=1e-14)
    assert res.residual_norm == pytest.approx(np.linalg.norm(F @ x - b), rel=1e-12)


def test_fixed_point_residual():
    op, x_true, b = problem(6, 3)
    cfg = SolverConfig(sparsity_prior_r=3)
    res = ifta_solve(op, b, cfg)
    assert res.converged
    x = res.solution
    assert fixed_point_residual(op, x, b, cfg) <= 10 * cfg.tol * np.linalg.norm(x)
    assert fixed_point_residual(op, np.zeros(100), np.zeros(30), cfg) == 0
    rng = np.random.default_rng(0)
    assert fixed_point_residual(op, rng.standard_normal(100), b, cfg) > 0


def test_dispatch_and_result_round_trip():
    op, _, b = problem(7, 2)
    res = solve(op, b, SolverConfig(sparsity_prior_r=2, algorithm="ista", max_iter=50))
    assert res.algorithm is Algorithm.ISTA
    assert res.lambda_trace[0][1] == LambdaRegime.SOFT.value
    doc = res.to_dict()
    back = RecoveryResult.from_dict(doc)
    assert back.to_dict() == doc


def test_ihta_r_equals_n_is_identity_threshold():
    A = np.random.default_rng(3).standard_normal((4, 6))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        op = LinearOperator(A)
    b = A @ np.ones(6)
    res = ihta_solve(op, b, SolverConfig(sparsity_prior_r=6, max_iter=5))
    assert np.count_nonzero(res.solution) == 6
