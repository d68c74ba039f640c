"""Command-line entry point: fit, predict, bench and diagnose.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure (the partial trace is still written), 5 diagnostic failure.

Every text output starts with a header carrying the package version, the
full run specification and the seed. Wall-clock columns are zeroed unless
``--timing`` is given so that repeated runs are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .baseline import FoConfig, fo_solve, passes_to_gap, smoothness_estimate
from .data import Dataset, load_any, parse_synth, split, standardize, apply_standardization
from .errors import CapacityError, DataError, GSCError, NumericalError, PreconditionError
from .globalization import (GlobalizationConfig, SolveTrace, next_mu_inclusion_check, solve,
                            theorem_bound)
from .linsys import make_rng
from .losses import (DenseFeatures, FiniteSumProblem, LossFamily, check_gsc_inequality,
                     hessian_equivalence_check)
from .newton import (MAX_RHO, AnmConfig, dikin_membership, function_gap_bounds_check,
                     minimize_dense, newton_decrement_exact)
from .nystrom import (NystromModel, KernelSpec, decision_labels, kernel_solve, load_model, predict,
                      save_model)

log = logging.getLogger("gscnewton")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL, EXIT_DIAGNOSE = 0, 2, 3, 4, 5
GAP_LEVELS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- headers

def runspec(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def header_lines(args) -> list[str]:
    return [f"# gscnewton {__version__}",
            "# runspec " + json.dumps(runspec(args), sort_keys=True),
            f"# seed {args.seed}"]


def header_dict(args) -> dict:
    return {"version": __version__, "runspec": runspec(args), "seed": args.seed}


def _out(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def write_json(args, name, payload):
    path = _out(args, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"header": header_dict(args), **payload}, fh, indent=2, allow_nan=True)
        fh.write("\n")
    return path


def write_trace(args, name, trace: SolveTrace):
    path = _out(args, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(header_lines(args)) + "\n")
        trace.write_csv(fh, timing=args.timing)
    return path


# ---------------------------------------------------------------- setup

def load_dataset(args) -> Dataset:
    if args.data and args.synth:
        raise UsageError("give either --data or --synth, not both")
    if args.synth:
        try:
            ds = parse_synth(args.synth, seed=args.seed)
        except PreconditionError as exc:
            raise UsageError(str(exc)) from None
    elif args.data:
        try:
            ds = load_any(args.data, args.label_column)
        except OSError as exc:
            raise DataError(f"cannot read data file {args.data}: {exc.strerror or exc}") from None
    else:
        raise UsageError("one of --data or --synth is required")
    return ds


def make_loss(name: str, y) -> tuple[LossFamily, np.ndarray]:
    """Loss family plus labels in the form the family expects (softmax: 1..k)."""
    if name == "softmax":
        classes, inv = np.unique(y, return_inverse=True)
        if len(classes) < 2:
            raise DataError("softmax needs at least two classes")
        return LossFamily.softmax(len(classes)), inv + 1.0
    return LossFamily.from_name(name), np.asarray(y, dtype=float)


def make_config(args, kernel: bool) -> GlobalizationConfig:
    if args.rho > MAX_RHO + 1e-15:
        raise UsageError(f"--rho must be <= 1/7 (got {args.rho})")
    solver = args.solver or ("pcg" if kernel else "exact")
    Q = args.Q if args.Q is not None else (args.M if kernel else None)
    anm = AnmConfig(rho=args.rho, solver=solver, tau=args.tau, Q=Q, sampling=args.sampling,
                    max_steps=args.max_steps, seed=args.seed)
    return GlobalizationConfig(q_rule=args.q_rule, q=args.q, t=args.t, rho=args.rho, epsilon=args.eps,
                               certified=args.certified, T_override=args.T, anm=anm, seed=args.seed)


@dataclass
class Fitted:
    problem: object
    x: np.ndarray
    trace: SolveTrace
    model: NystromModel | None = None
    loss: LossFamily | None = None
    extra: dict = field(default_factory=dict)


class _Recorder:
    """Collects trace rows as they are produced so a failed run still leaves a trace."""

    def __init__(self):
        self.trace = SolveTrace()

    def __call__(self, row, x):
        self.trace.rows.append(row)


def fit_problem(args, ds: Dataset, lam: float, recorder: _Recorder | None = None) -> Fitted:
    loss, y = make_loss(args.loss, ds.y)
    config = make_config(args, kernel=bool(args.kernel))
    if args.kernel:
        spec = KernelSpec(args.kernel, args.sigma)
        model, trace = kernel_solve((ds.X, y), spec, lam, args.M, args.Q, config, centers=args.centers,
                                    seed=args.seed, loss=loss, callback=recorder)
        return Fitted(None, model.alpha, trace, model, loss)
    problem = FiniteSumProblem(DenseFeatures(ds.X), y, loss)
    x, trace = solve(problem, lam, config, callback=recorder)
    return Fitted(problem, x, trace, None, loss)


def prepare(args) -> Dataset:
    ds = load_dataset(args)
    if args.standardize:
        ds = standardize(ds)
    return ds


# ---------------------------------------------------------------- fit

def parametric_scores(weights: dict, X):
    w = np.asarray(weights["weights"], dtype=float)
    if weights.get("mean") is not None:
        X = (X - np.asarray(weights["mean"])) / np.asarray(weights["std"])
    if weights["loss"] == "softmax":
        d = X.shape[1]
        return X @ w.reshape(weights["n_classes"], d).T
    return X @ w


def cmd_fit(args) -> int:
    ds = prepare(args)
    rec = _Recorder()
    try:
        fitted = fit_problem(args, ds, args.lam, rec)
    except NumericalError as exc:
        write_trace(args, "trace.csv", rec.trace)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    tr = fitted.trace
    write_trace(args, "trace.csv", tr)
    last = tr.rows[-1] if tr.rows else None
    summary = {
        "final_objective": last.objective if last else None,
        "decrement_estimate": math.sqrt(max(last.decrement_estimate, 0.0)) if last else None,
        "K": tr.K,
        "phase1_runs": tr.phase1_runs,
        "newton_steps": tr.newton_steps,
        "total_inner_iters": tr.inner_iters,
        "passes": tr.passes,
        "wall_ms": tr.wall_ms if args.timing else None,
        "lambda": args.lam,
        "mu0": tr.mu0,
    }
    if fitted.problem is not None:
        g0 = float(np.linalg.norm(fitted.problem.gradient(np.zeros(fitted.problem.dim), 0.0)))
        # the bound needs ||x*||; the certified output is within eps of it
        summary["K_bound_estimate"] = theorem_bound(fitted.problem.radius, float(np.linalg.norm(fitted.x)),
                                                    g0, args.lam)
        summary["radius"] = fitted.problem.radius
    if fitted.model is not None:
        if fitted.loss.kind == "softmax":
            raise UsageError("kernel softmax models cannot be saved in the binary model format")
        save_model(fitted.model, _out(args, "model.bin"))
        write_json(args, "model.json", {"model_file": "model.bin", "format": "GSCNYM01"})
    else:
        write_json(args, "weights.json", {
            "loss": fitted.loss.kind, "n_classes": fitted.loss.n_classes, "d": ds.p,
            "weights": [float(v) for v in fitted.x],
            "mean": None if ds.mean is None else [float(v) for v in ds.mean],
            "std": None if ds.std is None else [float(v) for v in ds.std],
        })
    write_json(args, "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- predict

def cmd_predict(args) -> int:
    ds = load_dataset(args)
    path = args.model
    try:
        if path.endswith(".json"):
            with open(path, encoding="utf-8") as fh:
                weights = json.load(fh)
            scores = parametric_scores(weights, ds.X)
            kind, k = weights["loss"], weights.get("n_classes") or 1
            loss = LossFamily.softmax(k) if kind == "softmax" else LossFamily.from_name(kind)
        else:
            model = load_model(path)
            scores, loss = predict(model, ds.X), model.loss
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc.strerror or exc}") from None
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None
    labels = decision_labels(scores, loss)
    out = _out(args, "predictions.csv")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(header_lines(args)) + "\n")
        if scores.ndim == 1:
            fh.write("index,score,label\n")
            for i, (s, l) in enumerate(zip(scores, labels)):
                fh.write(f"{i},{float(s)!r},{float(l)!r}\n")
        else:
            fh.write("index,label\n")
            for i, l in enumerate(labels):
                fh.write(f"{i},{float(l)!r}\n")
    result = {"n": int(ds.n)}
    if loss.kind in ("logistic", "softmax"):
        truth = ds.y if loss.kind == "logistic" else make_loss("softmax", ds.y)[1]
        if loss.kind == "logistic":
            truth = np.where(truth > 0, 1.0, -1.0)
        result["error_rate"] = float(np.mean(labels != truth))
    else:
        result["mse"] = float(np.mean((np.asarray(scores) - ds.y) ** 2))
    write_json(args, "predict_summary.json", result)
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- bench

def _error_rate(scores, y, loss):
    if loss.kind == "logistic":
        return float(np.mean(np.where(scores >= 0, 1.0, -1.0) != np.where(y > 0, 1.0, -1.0)))
    if loss.kind == "softmax":
        return float(np.mean(decision_labels(scores, loss) != y))
    return float(np.mean((scores - y) ** 2))


def _scores(fitted: Fitted, X):
    if fitted.model is not None:
        return predict(fitted.model, X)
    x = fitted.x
    if fitted.loss.kind == "softmax":
        return X @ x.reshape(fitted.loss.n_classes, X.shape[1]).T
    return X @ x


def lambda_sweep(args) -> int:
    lams = [float(v) for v in args.lambda_sweep.split(",") if v.strip()]
    if not lams or any(not v > 0 for v in lams):
        raise UsageError("--lambda-sweep needs positive comma-separated values")
    ds = load_dataset(args)
    train, test = split(ds, args.test_fraction, seed=args.seed)
    if args.standardize:
        train = standardize(train)
        test = apply_standardization(test, train.mean, train.std)
    rows = []
    for lam in lams:
        fitted = fit_problem(args, train, lam)
        loss = fitted.loss
        ytr = make_loss(args.loss, train.y)[1]
        yte = make_loss(args.loss, test.y)[1] if test.n else None
        rows.append((lam, fitted.trace.rows[-1].objective, _error_rate(_scores(fitted, train.X), ytr, loss),
                     _error_rate(_scores(fitted, test.X), yte, loss) if test.n else math.nan))
    path = _out(args, "lambda_sweep.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(header_lines(args)) + "\n")
        fh.write("lambda,train_objective,train_error,test_error\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")
    for r in rows:
        print(f"lambda={r[0]:.1e}  train_obj={r[1]:.6g}  train_err={r[2]:.4f}  test_err={r[3]:.4f}")
    return EXIT_OK


def _tuned_baseline(args, problem, lam, f_star):
    L = smoothness_estimate(problem, lam)
    batch = args.fo_batch if args.fo_batch else (args.M if args.kernel else min(problem.n, 100))
    mults = [float(v) for v in args.fo_tune.split(",")] if args.fo_tune else [args.fo_step]
    best = None
    for mult in mults:
        cfg = FoConfig(step_size=mult / (3.0 * L), batch_size=batch, epochs=args.fo_epochs,
                       momentum="katyusha" if args.baseline == "katyusha" else "none", seed=args.seed)
        try:
            x, tr = fo_solve(problem, lam, cfg)
        except NumericalError:
            continue
        p = passes_to_gap(tr, f_star, 1e-3)
        key = (p if p is not None else math.inf, tr.rows[-1].objective)
        if best is None or key < best[0]:
            best = (key, mult, tr)
    if best is None:
        raise NumericalError("every baseline step size diverged")
    return best[1], best[2]


def cmd_bench(args) -> int:
    if args.lambda_sweep:
        return lambda_sweep(args)
    if not args.baseline:
        raise UsageError("bench needs --baseline (svrg or katyusha) or --lambda-sweep")
    ds = prepare(args)
    rec = _Recorder()
    try:
        fitted = fit_problem(args, ds, args.lam, rec)
    except NumericalError as exc:
        write_trace(args, "trace_second_order.csv", rec.trace)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if fitted.model is not None:
        from .nystrom import ProjectedProblem

        m = fitted.model
        _, y = make_loss(args.loss, ds.y)
        problem = ProjectedProblem(ds.X, y, fitted.loss, m.kernel, m.centers, m.T, m.jitter)
    else:
        problem = fitted.problem
    write_trace(args, "trace_second_order.csv", fitted.trace)
    try:
        x_star = minimize_dense(problem, args.lam)
        f_star, source = problem.objective(x_star, args.lam), "dense_newton"
    except CapacityError:
        f_star, source = None, "best_observed"
    mult, fo_trace = _tuned_baseline(args, problem, args.lam, f_star if f_star is not None else -math.inf)
    if f_star is None:
        f_star = min(min(r.objective for r in fitted.trace.rows), min(r.objective for r in fo_trace.rows))
    write_trace(args, "trace_baseline.csv", fo_trace)
    table = {f"{g:.0e}": {"second_order": passes_to_gap(fitted.trace, f_star, g),
                          "baseline": passes_to_gap(fo_trace, f_star, g)} for g in GAP_LEVELS}
    comparison = {"f_star": f_star, "f_star_source": source, "baseline": args.baseline,
                  "baseline_step_multiplier": mult, "baseline_budget_passes": fo_trace.passes,
                  "second_order_passes": fitted.trace.passes, "passes_to_gap": table}
    write_json(args, "comparison.json", comparison)
    print(f"{'gap':>8} {'second-order':>14} {args.baseline:>14}")
    for g, v in table.items():
        fmt = lambda p: "-" if p is None else f"{p:g}"
        print(f"{g:>8} {fmt(v['second_order']):>14} {fmt(v['baseline']):>14}")
    return EXIT_OK


# ---------------------------------------------------------------- diagnose

def _dikin_start(problem, lam, x_star, c, rng):
    d = rng.standard_normal(problem.dim)
    d /= np.linalg.norm(d)
    s = 1.0
    for _ in range(200):
        if dikin_membership(problem, x_star + s * d, lam, c):
            return x_star + s * d
        s *= 0.5
    return x_star + s * d


def run_diagnostics(problem, lam: float, seed=0, probes: int = 30):
    """Dense checks of the GSC inequality, Hessian equivalence, Dikin-ellipsoid
    rates, the function-gap sandwich and the next-mu inclusion. Yields
    (name, passed, detail)."""
    rng = make_rng(seed)
    dim = problem.dim
    R = problem.radius
    scale = 1.0 / max(R, 1.0)

    def safe(name, fn):
        try:
            ok, detail = fn()
        except (GSCError, np.linalg.LinAlgError, ValueError) as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        return name, ok, detail

    def gsc():
        worst = 0.0
        vac = False
        for _ in range(probes):
            x, h, k = rng.standard_normal((3, dim))
            rep = check_gsc_inequality(problem, x, h, k)
            if not rep.passed:
                return False, f"ratio {rep.ratio:.4g}"
            worst, vac = max(worst, rep.ratio), rep.vacuous
        return True, "vacuous (R = 0)" if vac else f"max ratio {worst:.4f}"

    def sandwich():
        for _ in range(probes):
            x, h = rng.standard_normal((2, dim))
            h *= scale * rng.uniform(0.1, 2.0) / np.linalg.norm(h)
            rep = hessian_equivalence_check(problem, x, h, lam)
            if not rep.passed:
                return False, f"eigenvalues [{rep.lo:.4g}, {rep.hi:.4g}] vs exp(+-{rep.bound:.4g})"
        return True, f"{probes} probes"

    state = {}

    def optimum():
        state["x_star"] = minimize_dense(problem, lam)
        nu = newton_decrement_exact(problem, state["x_star"], lam)
        return nu <= 1e-8, f"nu at optimum {nu:.2e}"

    def quadratic():
        x = _dikin_start(problem, lam, state["x_star"], MAX_RHO / 2, rng)
        nu0 = newton_decrement_exact(problem, x, lam)
        for t in range(1, 4):
            g = problem.gradient(x, lam)
            x = x - np.linalg.solve(problem.hessian_dense(x, lam), g)
            nu = newton_decrement_exact(problem, x, lam)
            if nu > 1.01 * 2.0 ** -(2 ** t - 1) * nu0 and nu > 1e-12:
                return False, f"t={t}: nu ratio {nu / nu0:.3g}"
        return True, f"nu0 {nu0:.3g}"

    def gap():
        for _ in range(max(5, probes // 3)):
            x = _dikin_start(problem, lam, state["x_star"], MAX_RHO, rng)
            rep = function_gap_bounds_check(problem, x, lam, state["x_star"], slack=1e-6)
            if rep.applicable and not rep.passed:
                return False, f"gap {rep.gap:.3g} vs nu^2 {rep.nu ** 2:.3g}"
        return True, "nu^2/4 <= gap <= nu^2"

    def inclusion():
        if R == 0:
            return True, "vacuous (R = 0)"
        c = MAX_RHO
        checked = 0
        for _ in range(probes):
            mu = lam * 10 ** rng.uniform(0, 2)
            x_mu = minimize_dense(problem, mu)
            x = _dikin_start(problem, mu, x_mu, c / 3, rng)
            s = 1.0 + R * float(np.linalg.norm(x)) / c
            q = rng.uniform(1.0 - 2.0 / (3.0 * s), 1.0)
            rep = next_mu_inclusion_check(problem, x, mu, c, q)
            if rep.applicable:
                checked += 1
                if not rep.passed:
                    return False, f"nu_q {rep.nu_qmu:.3g} > {rep.bound:.3g}"
        return True, f"{checked} tuples"

    yield safe("gsc_inequality", gsc)
    yield safe("hessian_equivalence", sandwich)
    opt = safe("oracle_optimum", optimum)
    yield opt
    if opt[1]:
        yield safe("newton_quadratic_rate", quadratic)
        yield safe("function_gap_sandwich", gap)
        yield safe("next_mu_inclusion", inclusion)


def cmd_diagnose(args) -> int:
    ds = prepare(args)
    loss, y = make_loss(args.loss, ds.y)
    if args.inject_bug:
        loss = loss.with_curvature_sign(-1.0)
    problem = FiniteSumProblem(DenseFeatures(ds.X), y, loss)
    lines, all_ok = [], True
    for name, ok, detail in run_diagnostics(problem, args.lam, args.seed, args.probes):
        all_ok &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    lines.append("all diagnostics passed" if all_ok else "diagnostics FAILED")
    print("\n".join(lines))
    with open(_out(args, "diagnose.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(header_lines(args) + lines) + "\n")
    return EXIT_OK if all_ok else EXIT_DIAGNOSE


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p, diag=False):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="libsvm or .csv file")
    g.add_argument("--synth", default="logistic:n=40,d=3" if diag else None,
                   help="synthetic generator, e.g. logistic:n=2000,d=20 or moons:n=500,noise=0.1")
    g.add_argument("--label-column", default=0, type=lambda v: int(v) if v.lstrip("-").isdigit() else v)
    g.add_argument("--standardize", action="store_true")
    p.add_argument("--loss", default="logistic", choices=["logistic", "softmax", "robust", "squared"])
    p.add_argument("--lambda", dest="lam", type=float, default=1e-3 if diag else 1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--timing", action="store_true", help="record wall-clock times (breaks byte-reproducibility)")


def _solver(p):
    g = p.add_argument_group("solver")
    g.add_argument("--eps", type=float, default=1e-10)
    g.add_argument("--q-rule", default="adaptive", choices=["adaptive", "variant", "fixed"])
    g.add_argument("--q", type=float, default=None, help="decrease factor for --q-rule fixed")
    g.add_argument("--t", type=int, default=2, help="approximate Newton steps per mu")
    g.add_argument("--T", type=int, default=None, help="override the final-phase step count")
    g.add_argument("--certified", action="store_true", help="stop the final phase on the decrement test")
    g.add_argument("--rho", type=float, default=MAX_RHO)
    g.add_argument("--tau", type=int, default=3)
    g.add_argument("--solver", choices=["exact", "pcg"], default=None)
    g.add_argument("--sampling", choices=["uniform", "leverage"], default="uniform")
    g.add_argument("--max-steps", type=int, default=200)
    k = p.add_argument_group("kernel")
    k.add_argument("--kernel", choices=["gaussian", "linear"], default=None)
    k.add_argument("--sigma", type=float, default=1.0)
    k.add_argument("--M", type=int, default=100)
    k.add_argument("--Q", type=int, default=None)
    k.add_argument("--centers", choices=["uniform", "leverage"], default="uniform")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gscnewton", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gscnewton {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model and write model, trace and summary")
    _common(p)
    _solver(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="score a dataset with a saved model")
    _common(p)
    p.add_argument("--model", required=True, help="model.bin (kernel) or weights.json (parametric)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="second-order solver vs first-order baseline, or a lambda sweep")
    _common(p)
    _solver(p)
    p.add_argument("--baseline", choices=["svrg", "katyusha"], default=None)
    p.add_argument("--fo-epochs", type=int, default=50)
    p.add_argument("--fo-batch", type=int, default=None)
    p.add_argument("--fo-step", type=float, default=1.0, help="step as a multiple of 1/(3L)")
    p.add_argument("--fo-tune", default=None, help="comma list of step multiples to try")
    p.add_argument("--lambda-sweep", default=None, help="comma list of lambdas; writes lambda_sweep.csv")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("diagnose", help="dense self-checks on a small fixture")
    _common(p, diag=True)
    p.add_argument("--probes", type=int, default=30)
    p.add_argument("--inject-bug", action="store_true", help="flip the sign of the loss curvature")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code
    try:
        return args.func(args)
    except (UsageError, PreconditionError, CapacityError) as exc:
        print(f"gscnewton: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"gscnewton: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"gscnewton: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
