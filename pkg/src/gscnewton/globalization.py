"""Two-phase globalization: shrink the regularizer, then finish at the target.

Phase I starts at x = 0 with mu_0 = 7 R ||grad f(0)|| (so 0 lies in the
Dikin ellipsoid of f_{mu_0}) and alternates a short approximate-Newton run
with a decrease mu <- q mu until mu would drop below lam. Phase II runs
approximate Newton at lam, either for a fixed number of steps or until the
decrement certificate fires.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import NonConvergenceError, PreconditionError
from .linsys import make_rng
from .newton import MAX_RHO, AnmConfig, anm_run, anm_run_until, anm_step, solve_newton_system, start_iterate

Q_RULES = ("adaptive", "variant", "fixed")
TRACE_COLUMNS = ("step", "phase", "mu", "q", "decrement_estimate", "objective",
                 "cum_inner_iters", "cum_passes", "wall_ms")


@dataclass
class GlobalizationConfig:
    q_rule: str = "adaptive"
    q: float | None = None
    t: int = 2
    rho: float = MAX_RHO
    epsilon: float = 1e-10
    mu0_override: float | None = None
    max_outer: int | None = None
    certified: bool = False
    T_override: int | None = None
    anm: AnmConfig = field(default_factory=AnmConfig)
    seed: int = 0

    def __post_init__(self):
        if self.q_rule not in Q_RULES:
            raise PreconditionError(f"unknown q rule {self.q_rule!r}")
        if self.q_rule == "fixed":
            if self.q is None or not 0 < self.q < 1:
                raise PreconditionError("fixed q must lie in (0, 1)")
        if not 0 <= self.rho <= MAX_RHO + 1e-15:
            raise PreconditionError(f"rho must be <= 1/7, got {self.rho}")
        if self.t < 1 or (self.q_rule != "fixed" and self.t < 2):
            raise PreconditionError("adaptive rules need t >= 2 inner steps")
        if not self.epsilon > 0:
            raise PreconditionError("epsilon must be positive")
        if self.T_override is not None and self.T_override < 0:
            raise PreconditionError("T must be >= 0")
        if self.anm.rho != self.rho:
            self.anm = replace(self.anm, rho=self.rho)

    def echo(self) -> dict:
        d = asdict(self)
        d["anm"] = asdict(self.anm)
        return d


@dataclass
class TraceRow:
    step: int
    phase: str
    mu: float
    q: float | None
    decrement_estimate: float
    objective: float
    cum_inner_iters: int
    cum_passes: int
    wall_ms: float


@dataclass
class SolveTrace:
    rows: list = field(default_factory=list)
    K: int = 0
    phase1_runs: int = 0
    phase2_steps: int = 0
    newton_steps: int = 0
    mu0: float = 0.0
    T: int | None = None
    seed: int = 0
    config: dict = field(default_factory=dict)
    wall_ms: float = 0.0

    @property
    def q_sequence(self):
        return [r.q for r in self.rows if r.phase == "I"]

    @property
    def inner_iters(self) -> int:
        return self.rows[-1].cum_inner_iters if self.rows else 0

    @property
    def passes(self) -> int:
        return self.rows[-1].cum_passes if self.rows else 0

    def write_csv(self, fh, timing: bool = True):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([r.step, r.phase, repr(float(r.mu)), "" if r.q is None else repr(float(r.q)),
                        repr(float(r.decrement_estimate)), repr(float(r.objective)),
                        r.cum_inner_iters, r.cum_passes,
                        f"{r.wall_ms:.3f}" if timing else "0"])


def initial_mu(problem) -> float:
    """mu_0 = 7 R ||grad f(0)||; zero means Phase I is unnecessary."""
    g0 = problem.gradient(np.zeros(problem.dim), 0.0)
    return 7.0 * problem.radius * float(np.linalg.norm(g0))


def adaptive_q(x, R: float) -> float:
    a = 7.0 * R * float(np.linalg.norm(x))
    return (1.0 / 3.0 + a) / (1.0 + a)


def adaptive_q_variant(problem, x, mu: float, config: GlobalizationConfig, rng=None) -> float:
    """q from the H_mu^{-1}-norm of x, using one extra relative solve."""
    if not mu > 0:
        raise PreconditionError("mu must be positive")
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return 1.0 / 3.0
    res, _ = solve_newton_system(problem, x, mu, x, config.anm, rng)
    t = 7.0 * math.sqrt(7.0 / 6.0) * problem.radius * math.sqrt(mu) * math.sqrt(max(res.b_dot_z, 0.0))
    return (1.0 / 3.0 + t) / (1.0 + t)


def phase2_steps(lam: float, eps: float, R: float) -> int:
    """T = ceil(log2 sqrt(max(1, lam / (eps R^2))))."""
    if R == 0:
        raise PreconditionError("T is unbounded for R = 0; use certified stopping")
    return max(0, math.ceil(math.log2(math.sqrt(max(1.0, lam / (eps * R * R))))))


def theorem_bound(R: float, x_star_norm: float, grad0_norm: float, lam: float) -> int:
    """floor((3 + 11 R ||x*||) log(7 R ||grad f(0)|| / lam)); 0 if no Phase I."""
    mu0 = 7.0 * R * grad0_norm
    if mu0 <= lam:
        return 0
    return math.floor((3.0 + 11.0 * R * x_star_norm) * math.log(mu0 / lam))


def fixed_q_bound(mu0: float, lam: float, q: float) -> float:
    if mu0 <= lam:
        return 0.0
    return math.log(mu0 / lam) / (1.0 - q)


@dataclass
class InclusionReport:
    applicable: bool
    passed: bool | None
    nu_mu: float
    nu_qmu: float | None
    bound: float | None


def next_mu_inclusion_check(problem, x, mu: float, c: float, q: float) -> InclusionReport:
    """Dense check that nu_mu(x) <= (c/3) sqrt(mu)/R implies nu_{q mu}(x) <= c sqrt(q mu)/R."""
    from .newton import newton_decrement_exact

    R = problem.radius
    nu = newton_decrement_exact(problem, x, mu)
    if R == 0:
        return InclusionReport(True, True, nu, None, None)
    s = 1.0 + R * float(np.linalg.norm(x)) / c
    if nu > (c / 3.0) * math.sqrt(mu) / R or not (1.0 - 2.0 / (3.0 * s) <= q < 1.0):
        return InclusionReport(False, None, nu, None, None)
    nu_q = newton_decrement_exact(problem, x, q * mu)
    bound = c * math.sqrt(q * mu) / R
    return InclusionReport(True, nu_q <= bound * (1 + 1e-12), nu, nu_q, bound)


def effective_dimension(problem, x, lam: float) -> float:
    """Tr(H (H + lam I)^{-1}) from the dense Hessian spectrum."""
    ev = np.clip(np.linalg.eigvalsh(problem.hessian_dense(x, 0.0)), 0.0, None)
    return float(np.sum(ev / (ev + lam)))


def _outer_cap(config: GlobalizationConfig, R: float, xnorm: float, mu0: float, lam: float) -> float:
    if config.max_outer is not None:
        return config.max_outer
    logr = math.log(max(mu0 / lam, 1.0))
    if config.q_rule == "fixed":
        est = logr / (1.0 - config.q)
    else:
        est = (3.0 + 11.0 * R * xnorm) * logr
    return 10.0 * est + 10.0


def solve(problem, lam: float, config: GlobalizationConfig | None = None, callback=None):
    """Minimize f_lam. Returns (x_hat, SolveTrace).

    ``callback(row, x)`` is invoked after each trace row, if given.
    """
    config = config or GlobalizationConfig()
    if not lam > 0:
        raise PreconditionError("lam must be positive")
    clock = time.perf_counter()
    rng = make_rng(config.seed)
    R = problem.radius
    mu0 = config.mu0_override if config.mu0_override is not None else initial_mu(problem)
    trace = SolveTrace(mu0=mu0, seed=config.seed, config=config.echo())

    def record(step, phase, mu, q, it):
        row = TraceRow(step, phase, mu, q, it.decrement_sq_estimate, problem.objective(it.x, lam),
                       it.inner_iters, it.passes, 1e3 * (time.perf_counter() - clock))
        trace.rows.append(row)
        if callback is not None:
            callback(row, it.x)

    x0 = np.zeros(problem.dim)
    it = None
    if R > 0 and mu0 > lam:
        mu = mu0
        it = start_iterate(problem, x0, mu)
        k = 0
        while True:
            it = anm_run(problem, it, mu, config.t, config.anm, rng)
            if config.q_rule == "adaptive":
                q = adaptive_q(it.x, R)
            elif config.q_rule == "variant":
                q = adaptive_q_variant(problem, it.x, mu, config, rng)
            else:
                q = config.q
            record(k, "I", mu, q, it)
            if q * mu < lam:
                break
            mu = q * mu
            k += 1
            if k > _outer_cap(config, R, float(np.linalg.norm(it.x)), mu0, lam):
                trace.K = k
                raise NonConvergenceError(f"Phase I exceeded its cap after {k} steps", trace=trace)
        trace.K = k
        trace.phase1_runs = k + 1
    it = start_iterate(problem, it if it is not None else x0, lam)
    steps_before = it.steps
    if config.certified or R == 0:
        it, _ = anm_run_until(problem, it, lam, config.epsilon, config.anm, rng,
                              callback=lambda s: record(s.steps, "II", lam, None, s))
        # the certifying solve does not move x; it refreshes the last row
        if trace.rows and trace.rows[-1].phase == "II" and trace.rows[-1].step == it.steps:
            trace.rows.pop()
        record(it.steps, "II", lam, None, it)
    else:
        T = config.T_override if config.T_override is not None else phase2_steps(lam, config.epsilon, R)
        trace.T = T
        for _ in range(T):
            it = anm_step(problem, it, config.anm, rng)
            record(it.steps, "II", lam, None, it)
    trace.phase2_steps = it.steps - steps_before
    trace.newton_steps = it.steps
    trace.wall_ms = 1e3 * (time.perf_counter() - clock)
    return it.x, trace
