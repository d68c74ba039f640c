"""Relative-approximation linear solvers and subsampled Hessian preconditioners.

A vector z is a rho-relative approximation of A^{-1} b when
``||z - A^{-1} b||_A <= rho ||A^{-1} b||_A``. Every solver here returns such a
z together with the certified ``rho_bound`` implied by its iteration count.

Randomness uses numpy's Philox generator (a 64-bit counter-based bit
generator), created through :func:`make_rng` from an integer seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import CapacityError, DomainError, NumericalError, PreconditionError, SingularityError

LEVERAGE_CAP = 2000
# CG stops early once the residual is this small relative to ||b||; the
# error certificate only improves by stopping at an (almost) exact solution.
_RESIDUAL_FLOOR = 1e-15


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class LsoResult:
    z: np.ndarray
    rho_bound: float
    inner_iters: int
    b_dot_z: float


@dataclass
class Preconditioner:
    """Upper-triangular B with B'B approximating the system matrix."""

    B: np.ndarray
    mu: float
    Q: int
    indices: np.ndarray | None = None
    weights: np.ndarray | None = None
    sampling: str = "uniform"
    extra: dict = field(default_factory=dict)

    def solve(self, v):
        """B^{-1} v."""
        return sla.solve_triangular(self.B, v, lower=False)

    def solve_t(self, v):
        """B^{-T} v."""
        return sla.solve_triangular(self.B, v, lower=False, trans="T")

    def matrix(self):
        return self.B.T @ self.B


def _upper_cholesky(A):
    try:
        return sla.cholesky(A, lower=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularityError(f"Cholesky factorization failed: {exc}") from exc


def exact_solve(A, b) -> LsoResult:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        factor = sla.cho_factor(A, lower=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularityError(f"matrix is not positive definite: {exc}") from exc
    z = sla.cho_solve(factor, b)
    return LsoResult(z, 0.0, 0, float(b @ z))


def cg_rho(cond_bound: float, iters: int) -> float:
    """Certified relative A-norm error of CG from zero after ``iters`` steps."""
    if cond_bound < 1:
        raise PreconditionError("cond_bound must be >= 1")
    s = math.sqrt(cond_bound)
    return min(2.0 * ((s - 1.0) / (s + 1.0)) ** iters, 1.0)


def pcg_rho(tau: int) -> float:
    """Certificate for PCG under 1/2 B'B <= A <= 3/2 B'B (condition number 3).

    (sqrt(3) - 1) / (sqrt(3) + 1) simplifies to 2 - sqrt(3).
    """
    if tau < 0:
        raise PreconditionError("tau must be >= 0")
    return min(2.0 * (2.0 - math.sqrt(3.0)) ** tau, 1.0)


def _cg(apply_A: Callable, b, iters: int):
    z = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    stop = (_RESIDUAL_FLOOR ** 2) * rs
    done = 0
    for _ in range(iters):
        if rs == 0.0 or rs <= stop:
            break
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        if not pAp > 0.0:
            raise NumericalError(f"CG breakdown: p'Ap = {pAp:g}")
        a = rs / pAp
        z += a * p
        r -= a * Ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        done += 1
    return z, done


def cg_solve(apply_A: Callable, b, iters: int, cond_bound: float) -> LsoResult:
    b = np.asarray(b, dtype=float)
    if iters < 0:
        raise PreconditionError("iters must be >= 0")
    rho = cg_rho(cond_bound, iters)
    z, done = _cg(apply_A, b, iters)
    return LsoResult(z, rho, done, float(b @ z))


def pcg_solve(apply_A: Callable, b, precond: Preconditioner, tau: int) -> LsoResult:
    """CG on B^{-T} A B^{-1} y = B^{-T} b, returning z = B^{-1} y."""
    b = np.asarray(b, dtype=float)
    if tau < 1:
        raise PreconditionError("tau must be >= 1")

    def op(v):
        return precond.solve_t(apply_A(precond.solve(v)))

    y, done = _cg(op, precond.solve_t(b), tau)
    z = precond.solve(y)
    return LsoResult(z, pcg_rho(tau), done, float(b @ z))


def preconditioner_from_matrix(A_tilde, mu: float, Q: int, **meta) -> Preconditioner:
    return Preconditioner(_upper_cholesky(np.asarray(A_tilde, dtype=float)), mu, Q, **meta)


def leverage_scores(t: float, features=None, gram=None, cap: int = LEVERAGE_CAP):
    """Exact ridge leverage scores l_i(t) = n ((G + t n I)^{-1} G)_ii.

    Pass either ``features`` (rows v_i, so G = V V'; a 3-d array of per-row
    factors G_i is also accepted) or an explicit ``gram`` matrix. The feature
    route uses the equivalent primal form l_i = v_i' (V'V/n + t I)^{-1} v_i and
    never builds G. Explicit Gram matrices are limited to ``cap`` rows.
    """
    if not t > 0:
        raise DomainError("leverage level t must be positive")
    if (features is None) == (gram is None):
        raise PreconditionError("pass exactly one of features or gram")
    if gram is not None:
        G = np.asarray(gram, dtype=float)
        n = G.shape[0]
        if n > cap:
            raise CapacityError(f"exact leverage scores limited to {cap} rows, got {n}")
        X = sla.solve(G + t * n * np.eye(n), G, assume_a="pos")
        return np.maximum(n * np.diag(X), 0.0)
    V = np.asarray(features, dtype=float)
    if V.ndim == 2:
        V = V[:, :, None]
    n, m, _ = V.shape
    flat = V.transpose(0, 2, 1).reshape(-1, m)
    C = flat.T @ flat / n
    C[np.diag_indices_from(C)] += t
    L = _upper_cholesky(C).T
    Y = sla.solve_triangular(L, flat.T, lower=True)
    per = np.sum(Y * Y, axis=0).reshape(n, -1).sum(axis=1)
    return np.maximum(per, 0.0)


def sample_leverage(scores, Q: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Q i.i.d. draws with p_i proportional to the scores; returns (draws, p)."""
    scores = np.asarray(scores, dtype=float)
    total = scores.sum()
    if total > 0:
        p = scores / total
    else:
        p = np.full(scores.shape[0], 1.0 / scores.shape[0])
    draws = rng.choice(scores.shape[0], size=Q, replace=True, p=p)
    return draws, p


def build_subsampled_preconditioner(problem, x, mu: float, Q: int, sampling: str = "uniform",
                                    seed=0, cap: int = LEVERAGE_CAP) -> Preconditioner:
    """B'B = (1/Q) sum_j weight_j hess_{i_j}(x) + mu I from Q sampled rows.

    Uniform sampling draws Q distinct rows (Q = n is the full pass, giving the
    exact Hessian); leverage sampling draws i.i.d. with weight 1/(m p_i) from
    a uniform subsample of at most ``cap`` rows (m rows in total).
    """
    n = problem.n
    if not 1 <= Q <= n:
        raise PreconditionError(f"Q must be in [1, {n}], got {Q}")
    if mu < 0:
        raise PreconditionError("mu must be nonnegative")
    rng = make_rng(seed)
    if sampling == "uniform":
        idx = np.arange(n) if Q == n else np.sort(rng.choice(n, size=Q, replace=False))
        w = np.ones(Q)
    elif sampling == "leverage":
        pool = np.arange(n) if n <= cap else np.sort(rng.choice(n, size=cap, replace=False))
        scores = leverage_scores(mu, features=problem.row_factors(x, pool)) if mu > 0 \
            else np.ones(pool.size)
        draws, p = sample_leverage(scores, Q, rng)
        idx = pool[draws]
        w = 1.0 / (pool.size * p[draws])
    else:
        raise PreconditionError(f"unknown sampling {sampling!r}")
    A = problem.subsampled_hessian(x, idx, w, mu)
    return preconditioner_from_matrix(A, mu, Q, indices=idx, weights=w, sampling=sampling)


def lso_check(A, b, z, rho: float) -> bool:
    """Exact membership test ||z - A^{-1}b||_A <= rho ||A^{-1}b||_A."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    z = np.asarray(z, dtype=float)
    zs = exact_solve(A, b).z
    e = z - zs
    err = math.sqrt(max(float(e @ A @ e), 0.0))
    ref = math.sqrt(max(float(zs @ A @ zs), 0.0))
    return err <= rho * ref + 1e-14 * max(ref, 1e-300)
