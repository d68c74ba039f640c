"""Newton decrement, approximate Newton iterations and Dikin-ellipsoid diagnostics.

An approximate Newton step is ``x <- x - dx`` where ``dx`` is a rho-relative
approximation of ``H_mu(x)^{-1} grad f_mu(x)``. There is no line search: the
convergence guarantees hold inside the Dikin ellipsoid
``{x : nu_mu(x) <= c sqrt(mu) / R}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NonConvergenceError, PreconditionError
from .linsys import (build_subsampled_preconditioner, exact_solve, make_rng, pcg_rho,
                     pcg_solve)

MAX_RHO = 1.0 / 7.0


@dataclass
class AnmConfig:
    """Approximate Newton settings.

    solver is "exact" (dense Cholesky) or "pcg" (subsampled preconditioner
    with Q rows and tau CG iterations). Q=None picks min(n, 2 * dim).
    """

    rho: float = MAX_RHO
    solver: str = "exact"
    tau: int = 3
    Q: int | None = None
    sampling: str = "uniform"
    max_steps: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.rho <= MAX_RHO + 1e-15:
            raise PreconditionError(f"rho must be in [0, 1/7], got {self.rho}")
        if self.solver not in ("exact", "pcg"):
            raise PreconditionError(f"unknown solver {self.solver!r}")
        if self.solver == "pcg":
            if self.tau < 1:
                raise PreconditionError("tau must be >= 1")
            if pcg_rho(self.tau) > self.rho + 1e-15:
                raise PreconditionError(
                    f"tau={self.tau} only certifies rho={pcg_rho(self.tau):.4g} > {self.rho:.4g}")
        if self.Q is not None and self.Q < 1:
            raise PreconditionError("Q must be >= 1")
        if self.max_steps < 1:
            raise PreconditionError("max_steps must be >= 1")

    def solver_rho(self) -> float:
        return 0.0 if self.solver == "exact" else pcg_rho(self.tau)


@dataclass
class Iterate:
    x: np.ndarray
    mu: float
    grad: np.ndarray
    decrement_sq_estimate: float = math.nan
    inner_iters: int = 0
    passes: int = 0
    steps: int = 0


def start_iterate(problem, x0, mu: float) -> Iterate:
    if isinstance(x0, Iterate):
        if x0.mu == mu:
            return x0
        return replace(x0, mu=mu, grad=problem.gradient(x0.x, mu),
                       decrement_sq_estimate=math.nan)
    x0 = np.asarray(x0, dtype=float).copy()
    return Iterate(x0, mu, problem.gradient(x0, mu))


def solve_newton_system(problem, x, mu: float, b, config: AnmConfig, rng=None):
    """Approximately solve H_mu(x) z = b. Returns (LsoResult, passes)."""
    if config.solver == "exact":
        res = exact_solve(problem.hessian_dense(x, mu), b)
        return res, 1
    rng = make_rng(config.seed if rng is None else rng)
    Q = config.Q if config.Q is not None else min(problem.n, 2 * problem.dim)
    Q = min(Q, problem.n)
    pre = build_subsampled_preconditioner(problem, x, mu, Q, config.sampling, rng)
    res = pcg_solve(lambda v: problem.hessian_vec(x, mu, v), b, pre, config.tau)
    return res, res.inner_iters


def anm_step(problem, iterate: Iterate, config: AnmConfig, rng=None) -> Iterate:
    mu = iterate.mu
    if not mu > 0:
        raise PreconditionError("regularization must be positive")
    res, passes = solve_newton_system(problem, iterate.x, mu, iterate.grad, config, rng)
    x_new = iterate.x - res.z
    return Iterate(x_new, mu, problem.gradient(x_new, mu), res.b_dot_z,
                   iterate.inner_iters + res.inner_iters, iterate.passes + passes,
                   iterate.steps + 1)


def anm_run(problem, x0, mu: float, t: int, config: AnmConfig, rng=None) -> Iterate:
    """t approximate Newton steps on f_mu from x0 (array or Iterate)."""
    if t < 1:
        raise PreconditionError("t must be >= 1")
    rng = make_rng(config.seed if rng is None else rng)
    it = start_iterate(problem, x0, mu)
    for _ in range(t):
        it = anm_step(problem, it, config, rng)
    return it


def anm_run_until(problem, x0, lam: float, eps: float, config: AnmConfig, rng=None,
                  callback=None):
    """Approximate Newton at lam until grad . dx <= (1 - rho) eps.

    Returns the first iterate passing the test (the step computed there is
    not applied) and the number of linear solves performed. ``callback`` sees
    every iterate produced by an applied step.
    """
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    rng = make_rng(config.seed if rng is None else rng)
    it = start_iterate(problem, x0, lam)
    threshold = (1.0 - config.rho) * eps
    history = []
    for solves in range(1, config.max_steps + 1):
        res, passes = solve_newton_system(problem, it.x, lam, it.grad, config, rng)
        history.append(res.b_dot_z)
        if res.b_dot_z <= threshold:
            return replace(it, decrement_sq_estimate=res.b_dot_z,
                           inner_iters=it.inner_iters + res.inner_iters,
                           passes=it.passes + passes), solves
        x_new = it.x - res.z
        it = Iterate(x_new, lam, problem.gradient(x_new, lam), res.b_dot_z,
                     it.inner_iters + res.inner_iters, it.passes + passes, it.steps + 1)
        if callback is not None:
            callback(it)
    raise NonConvergenceError(f"no certificate after {config.max_steps} solves", trace=history)


def anm_step_bound(nu0: float, eps: float) -> int:
    """Solve-count bound for anm_run_until started inside D(1/7)."""
    if nu0 <= 0:
        return 1
    return 2 + max(0, math.floor(math.log2(math.sqrt(4.0 / 3.0) * nu0 / math.sqrt(eps))))


def newton_decrement_exact(problem, x, lam: float) -> float:
    g = problem.gradient(x, lam)
    res = exact_solve(problem.hessian_dense(x, lam), g)
    return math.sqrt(max(res.b_dot_z, 0.0))


def minimize_dense(problem, lam: float, x0=None, max_iter: int = 500):
    """High-accuracy reference minimizer of f_lam: Newton with Armijo backtracking.

    Independent of the scheme above (it is damped and starts anywhere); used
    as the oracle optimum in diagnostics and tests.
    """
    x = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    prev = math.inf
    for _ in range(max_iter):
        g = problem.gradient(x, lam)
        step = exact_solve(problem.hessian_dense(x, lam), g).z
        nu2 = float(g @ step)
        if nu2 <= 1e-26 or (nu2 < 1e-18 and nu2 > 0.25 * prev):
            if nu2 < prev:
                x = x - step
            return x
        prev = nu2
        f0 = problem.objective(x, lam)
        a = 1.0
        if nu2 > 1e-12:
            while a > 1e-12 and problem.objective(x - a * step, lam) > f0 - 0.25 * a * nu2:
                a *= 0.5
        x = x - a * step
    return x


@dataclass
class DikinResult:
    member: bool
    nu: float
    radius: float
    vacuous: bool = False

    def __bool__(self):
        return self.member


def dikin_membership(problem, x, lam: float, c: float) -> DikinResult:
    nu = newton_decrement_exact(problem, x, lam)
    R = problem.radius
    if R == 0:
        return DikinResult(True, nu, math.inf, vacuous=True)
    bound = c * math.sqrt(lam) / R
    return DikinResult(nu <= bound, nu, bound)


@dataclass
class GapReport:
    applicable: bool
    nu: float
    gap: float
    passed: bool | None


def function_gap_bounds_check(problem, x, lam: float, x_star=None, slack: float = 1e-9) -> GapReport:
    """Check nu^2 / 4 <= f_lam(x) - f_lam(x*) <= nu^2 for x in D(1/7)."""
    if x_star is None:
        x_star = minimize_dense(problem, lam)
    dk = dikin_membership(problem, x, lam, MAX_RHO)
    f_star = problem.objective(x_star, lam)
    gap = problem.objective(x, lam) - f_star
    nu2 = dk.nu ** 2
    if not dk.member:
        return GapReport(False, dk.nu, gap, None)
    tol = slack * nu2 + 1e-14 * max(1.0, abs(f_star))
    ok = 0.25 * nu2 - tol <= gap <= nu2 + tol
    return GapReport(True, dk.nu, gap, bool(ok))
