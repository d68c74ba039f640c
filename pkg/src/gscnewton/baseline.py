"""Mini-batch SVRG, optionally with Katyusha momentum, as a first-order yardstick.

Pass accounting: a full gradient is one pass and a mini-batch gradient over
b rows is b/n of a pass (each variance-reduced step evaluates two of them).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, StepSizeError
from .globalization import SolveTrace, TraceRow
from .linsys import make_rng


@dataclass
class FoConfig:
    step_size: float | None = None  # None: 1 / (3 L) with L = a max||w_i||^2 + lam
    batch_size: int = 1
    epochs: int = 20
    momentum: str = "none"  # or "katyusha"
    inner: int | None = None  # steps per epoch, default n // batch_size
    seed: int = 0
    target_objective: float | None = None
    max_passes: float | None = None
    divergence_factor: float = 1e3

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise PreconditionError("step size must be positive")
        if self.batch_size < 1:
            raise PreconditionError("batch size must be >= 1")
        if self.momentum not in ("none", "katyusha"):
            raise PreconditionError(f"unknown momentum {self.momentum!r}")


def smoothness_estimate(problem, lam: float) -> float:
    return problem.loss.smoothness * problem.features.max_row_norm() ** 2 + lam


def fo_solve(problem, lam: float, config: FoConfig | None = None, x0=None, callback=None):
    """Run SVRG(-Katyusha) epochs on f_lam. Returns (x, SolveTrace)."""
    config = config or FoConfig()
    if not lam > 0:
        raise PreconditionError("lam must be positive")
    clock = time.perf_counter()
    n = problem.n
    b = min(config.batch_size, n)
    m = config.inner if config.inner is not None else max(1, n // b)
    L = smoothness_estimate(problem, lam)
    eta = config.step_size if config.step_size is not None else 1.0 / (3.0 * L)
    rng = make_rng(config.seed)
    phase = "KSVRG" if config.momentum == "katyusha" else "SVRG"
    trace = SolveTrace(seed=config.seed, config={"fo": config.__dict__.copy(), "step_size": eta})

    x_snap = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    f0 = problem.objective(x_snap, lam)
    fulls = 0
    steps = 0
    # integer counters keep the pass column exact: fulls + 2 b steps / n
    pass_count = lambda: fulls + 2.0 * b * steps / n

    def record(epoch, x):
        f = problem.objective(x, lam)
        if not math.isfinite(f) or f > config.divergence_factor * max(abs(f0), 1e-300):
            raise StepSizeError(f"objective rose from {f0:g} to {f:g}; reduce the step size")
        row = TraceRow(epoch, phase, lam, None, math.nan, f, steps, pass_count(),
                       1e3 * (time.perf_counter() - clock))
        trace.rows.append(row)
        if callback is not None:
            callback(row, x)
        return f

    def batch():
        return np.arange(n) if b == n else rng.integers(0, n, size=b)

    def bgrad(x, idx):
        return problem.batch_gradient(x, idx) + lam * x

    f = record(0, x_snap)
    # Katyusha state (strong convexity lam, smoothness 1 / (3 eta))
    L_eff = 1.0 / (3.0 * eta)
    tau2 = 0.5
    tau1 = min(math.sqrt(m * lam / (3.0 * L_eff)), 0.5)
    alpha = 1.0 / (3.0 * tau1 * L_eff)
    y = z = x_snap.copy()
    for epoch in range(1, config.epochs + 1):
        if config.target_objective is not None and f <= config.target_objective:
            break
        if config.max_passes is not None and pass_count() >= config.max_passes:
            break
        full = problem.gradient(x_snap, lam)
        fulls += 1
        if config.momentum == "none":
            x = x_snap.copy()
            for _ in range(m):
                idx = batch()
                x -= eta * (bgrad(x, idx) - bgrad(x_snap, idx) + full)
                steps += 1
            x_snap = x
        else:
            theta = 1.0 + alpha * lam
            acc = np.zeros_like(x_snap)
            wsum = 0.0
            wj = 1.0
            for _ in range(m):
                idx = batch()
                x = tau1 * z + tau2 * x_snap + (1.0 - tau1 - tau2) * y
                g = full + bgrad(x, idx) - bgrad(x_snap, idx)
                z_new = z - alpha * g
                y = x + tau1 * (z_new - z)
                z = z_new
                acc += wj * y
                wsum += wj
                wj *= theta
                steps += 1
            x_snap = acc / wsum
        f = record(epoch, x_snap)
    trace.newton_steps = 0
    trace.wall_ms = 1e3 * (time.perf_counter() - clock)
    return x_snap, trace


def passes_to_gap(trace: SolveTrace, f_star: float, gap: float):
    """First cumulative pass count at which objective - f_star <= gap, else None."""
    for r in trace.rows:
        if r.objective - f_star <= gap:
            return r.cum_passes
    return None
