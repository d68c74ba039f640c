import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh

from gscnewton.errors import CapacityError, DomainError, PreconditionError, SingularityError
from gscnewton.linsys import (build_subsampled_preconditioner, cg_rho, cg_solve, exact_solve,
                              leverage_scores, lso_check, make_rng, pcg_rho, pcg_solve,
                              preconditioner_from_matrix, sample_leverage)

from conftest import random_problem


def random_spd(d, seed=0, cond=100.0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return Q @ np.diag(np.geomspace(1.0, cond, d)) @ Q.T


def sandwich_ok(A, Bt):
    ev = eigh(A, Bt, eigvals_only=True)
    return ev.min() >= 0.5 and ev.max() <= 1.5


def test_exact_identity():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(exact_solve(np.eye(3), b).z, b)


def test_exact_diagonal():
    res = exact_solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
    np.testing.assert_allclose(res.z, [1.0, 1.0], rtol=1e-15)
    assert res.rho_bound == 0.0 and res.b_dot_z == pytest.approx(6.0)


def test_exact_residual():
    A = random_spd(10, seed=1)
    b = np.random.default_rng(2).standard_normal(10)
    z = exact_solve(A, b).z
    assert np.linalg.norm(A @ z - b) / np.linalg.norm(b) < 1e-12


def test_exact_rejects_indefinite():
    with pytest.raises(SingularityError):
        exact_solve(np.diag([1.0, -1.0]), np.ones(2))


def test_cg_identity_one_step():
    b = np.array([3.0, -1.0, 2.0])
    res = cg_solve(lambda v: v, b, 1, 1.0)
    np.testing.assert_allclose(res.z, b, rtol=1e-15)
    assert res.rho_bound == 0.0


def test_cg_finite_termination():
    A = np.diag(np.arange(1.0, 11.0))
    res = cg_solve(lambda v: A @ v, np.ones(10), 10, 10.0)
    assert np.linalg.norm(A @ res.z - 1.0) < 1e-8


def test_cg_rate_formula():
    assert cg_rho(3.0, 3) == pytest.approx(2 * (2 - math.sqrt(3)) ** 3, rel=1e-15)
    assert cg_rho(3.0, 3) == pytest.approx(0.03848, abs=1e-5)
    with pytest.raises(PreconditionError):
        cg_rho(0.5, 1)


def test_cg_breakdown_is_reported():
    from gscnewton.errors import NumericalError

    with pytest.raises(NumericalError):
        cg_solve(lambda v: -v, np.ones(3), 2, 1.0)


def test_pcg_exact_preconditioner_one_step():
    A = random_spd(6, seed=3)
    pre = preconditioner_from_matrix(A, 0.0, 6)
    b = np.arange(1.0, 7.0)
    res = pcg_solve(lambda v: A @ v, b, pre, 1)
    np.testing.assert_allclose(res.z, np.linalg.solve(A, b), rtol=1e-10)


def test_pcg_tau3_certificate():
    assert pcg_rho(3) <= 1 / 7
    assert pcg_rho(2) > 1 / 7


@pytest.mark.parametrize("tau", [1, 2, 3, 4, 5, 6])
def test_pcg_rho_geometric(tau):
    assert pcg_rho(tau + 1) / pcg_rho(tau) == pytest.approx(2 - math.sqrt(3), rel=1e-13)


def test_pcg_on_logistic_hessian_is_relative_approx():
    p = random_problem("logistic", n=500, d=10, seed=4)
    x = np.random.default_rng(5).standard_normal(10) * 0.3
    mu = 1e-3
    A = p.hessian_dense(x, mu)
    b = p.gradient(x, mu)
    for seed in range(10):
        pre = build_subsampled_preconditioner(p, x, mu, 200, "uniform", seed)
        if not sandwich_ok(A, pre.matrix()):
            continue
        res = pcg_solve(lambda v: A @ v, b, pre, 3)
        assert lso_check(A, b, res.z, 1 / 7)
        assert lso_check(A, b, res.z, res.rho_bound)


def test_full_sample_is_exact_hessian():
    p = random_problem("logistic", n=60, d=4, seed=6)
    x = np.ones(4) * 0.2
    pre = build_subsampled_preconditioner(p, x, 0.01, 60, "uniform", 0)
    np.testing.assert_allclose(pre.matrix(), p.hessian_dense(x, 0.01), rtol=1e-10, atol=1e-14)


def test_zero_q_rejected():
    p = random_problem("logistic", n=10, d=2)
    with pytest.raises(PreconditionError):
        build_subsampled_preconditioner(p, np.zeros(2), 0.1, 0)
    with pytest.raises(PreconditionError):
        build_subsampled_preconditioner(p, np.zeros(2), 0.1, 11)


def _sandwich_rate(Q, seeds=100):
    p = random_problem("logistic", n=500, d=10, seed=7)
    x = np.random.default_rng(8).standard_normal(10) * 0.3
    A = p.hessian_dense(x, 1e-3)
    return sum(sandwich_ok(A, build_subsampled_preconditioner(p, x, 1e-3, Q, "uniform", s).matrix())
               for s in range(seeds))


@pytest.mark.xfail(strict=True, reason="Q=200 of 500 Gaussian rows gives a top generalized "
                   "eigenvalue near 1.4 and passes on only 80-90% of seeds")
def test_uniform_subsample_sandwich_rate_q200():
    assert _sandwich_rate(200) >= 95


def test_uniform_subsample_sandwich_rate_grows_with_q():
    assert _sandwich_rate(200) < _sandwich_rate(350)
    assert _sandwich_rate(350) >= 95


def test_preconditioner_is_reproducible():
    p = random_problem("logistic", n=200, d=5, seed=9)
    x = np.ones(5) * 0.1
    for sampling in ("uniform", "leverage"):
        a = build_subsampled_preconditioner(p, x, 1e-2, 50, sampling, 3)
        b = build_subsampled_preconditioner(p, x, 1e-2, 50, sampling, 3)
        np.testing.assert_array_equal(a.B, b.B)


def test_leverage_orthonormal_closed_form():
    np.testing.assert_allclose(leverage_scores(0.5, gram=np.eye(2)), [1.0, 1.0], rtol=1e-15)


def test_leverage_large_t_vanishes():
    V = np.random.default_rng(0).standard_normal((20, 3))
    assert leverage_scores(1e12, features=V).max() < 1e-9


def test_leverage_duplicate_rows_share_score():
    V = np.random.default_rng(1).standard_normal((10, 3))
    V[7] = V[2]
    s = leverage_scores(0.1, features=V)
    assert s[7] == pytest.approx(s[2], rel=1e-12)


def test_leverage_primal_matches_dual():
    V = np.random.default_rng(2).standard_normal((30, 4))
    np.testing.assert_allclose(leverage_scores(0.2, features=V), leverage_scores(0.2, gram=V @ V.T),
                               rtol=1e-9)


def test_leverage_errors():
    with pytest.raises(DomainError):
        leverage_scores(0.0, gram=np.eye(2))
    with pytest.raises(CapacityError):
        leverage_scores(1.0, gram=np.eye(5), cap=4)
    with pytest.raises(PreconditionError):
        leverage_scores(1.0)


def test_leverage_sum_is_n_times_effective_dimension():
    V = np.random.default_rng(3).standard_normal((25, 4))
    t, n = 0.3, 25
    ev = np.linalg.eigvalsh(V.T @ V / n)
    assert leverage_scores(t, features=V).sum() == pytest.approx(n * np.sum(ev / (ev + t)), rel=1e-10)


def test_lso_check_edge_cases():
    A = random_spd(5, seed=4)
    b = np.ones(5)
    zs = np.linalg.solve(A, b)
    assert lso_check(A, b, zs, 0.0)
    assert lso_check(A, b, np.zeros(5), 1.0)
    assert not lso_check(A, b, np.zeros(5), 0.999)


def test_make_rng_passes_generators_through():
    g = make_rng(4)
    assert make_rng(g) is g
    assert make_rng(4).random() == make_rng(4).random()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_certificate_brackets_quadratic_form(seed, iters):
    A = random_spd(8, seed=seed, cond=50.0)
    b = np.random.default_rng(seed + 1).standard_normal(8)
    res = cg_solve(lambda v: A @ v, b, iters, 50.0)
    if res.rho_bound < 1:
        ref = b @ np.linalg.solve(A, b)
        assert (1 - res.rho_bound) * ref - 1e-12 <= res.b_dot_z <= (1 + res.rho_bound) * ref + 1e-12
        assert lso_check(A, b, res.z, res.rho_bound)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=2, max_size=30), st.integers(1, 50), st.integers(0, 99))
def test_leverage_sampling_distribution(scores, Q, seed):
    draws, p = sample_leverage(np.array(scores), Q, make_rng(seed))
    assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-12
    assert draws.shape == (Q,) and np.all(p[draws] > 0)
