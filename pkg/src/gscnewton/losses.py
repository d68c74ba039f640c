"""Generalized self-concordant loss families and the regularized finite-sum objective.

The objective is ``f_lam(x) = (1/n) sum_i loss(w_i . x, y_i) + lam/2 ||x||^2``.
Features are accessed through a small operator interface (``matvec``,
``rmatvec``, ``rows`` ...) so that the same problem class serves dense
parametric models and the implicit Nystrom feature map.

Softmax parameters ``X`` of shape (d, k) are flattened column-major, i.e.
``x[j * d + r] == X[r, j]``.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import expit, logsumexp

from .errors import CapacityError, DomainError, PreconditionError

log = logging.getLogger(__name__)

DENSE_DIM_LIMIT = 4096
LOSS_KINDS = ("logistic", "softmax", "robust", "squared")


@dataclass(frozen=True)
class LossFamily:
    """A loss family with its self-concordance constant and curvature bound.

    ``gsc_constant`` bounds |l'''| / l'' and ``smoothness`` bounds l''.
    ``curvature_sign`` exists only so the diagnostic harness can inject a
    sign bug in l''; leave it at +1.
    """

    kind: str
    n_classes: int = 1
    gsc_constant: float = 1.0
    smoothness: float = 0.25
    curvature_sign: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise DomainError(f"unknown loss kind {self.kind!r}")
        if self.kind == "softmax" and self.n_classes < 2:
            raise DomainError("softmax needs at least two classes")
        if self.gsc_constant < 0 or self.smoothness < 0:
            raise DomainError("loss constants must be nonnegative")

    @classmethod
    def logistic(cls) -> "LossFamily":
        return cls("logistic", 1, 1.0, 0.25)

    @classmethod
    def robust(cls) -> "LossFamily":
        # phi(u) = log(e^u + e^-u): phi''' / phi'' = -2 tanh(u), so the
        # constant is 2 (not 1).
        return cls("robust", 1, 2.0, 1.0)

    @classmethod
    def squared(cls) -> "LossFamily":
        return cls("squared", 1, 0.0, 1.0)

    @classmethod
    def softmax(cls, k: int, gsc_constant: float = 2.0) -> "LossFamily":
        return cls("softmax", int(k), float(gsc_constant), 0.5)

    @classmethod
    def from_name(cls, name: str, n_classes: int | None = None) -> "LossFamily":
        if name == "softmax":
            if n_classes is None:
                raise DomainError("softmax needs n_classes")
            return cls.softmax(n_classes)
        factories = {"logistic": cls.logistic, "robust": cls.robust, "squared": cls.squared}
        if name not in factories:
            raise DomainError(f"unknown loss {name!r}")
        return factories[name]()

    @property
    def is_scalar(self) -> bool:
        return self.kind != "softmax"

    def with_curvature_sign(self, sign: float) -> "LossFamily":
        return LossFamily(self.kind, self.n_classes, self.gsc_constant, self.smoothness, sign)


def _sech_sq(u):
    a = np.exp(-2.0 * np.abs(u))
    return 4.0 * a / (1.0 + a) ** 2


def loss_eval(family: LossFamily, t, y):
    """Value, first and second derivative of a scalar loss w.r.t. the score t.

    Works elementwise on arrays. Logistic labels must be +-1; the robust loss
    is applied to the residual ``y - t``.
    """
    if not family.is_scalar:
        raise DomainError("loss_eval is for scalar families; use softmax_eval")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite score or label")
    if family.kind == "logistic":
        z = y * t
        value = np.logaddexp(0.0, -z)
        d1 = -y * expit(-z)
        d2 = expit(z) * expit(-z)
    elif family.kind == "robust":
        u = y - t
        value = np.logaddexp(u, -u)
        d1 = -np.tanh(u)
        d2 = _sech_sq(u)
    else:
        r = t - y
        value = 0.5 * r * r
        d1 = r
        d2 = np.ones_like(r)
    d2 = np.maximum(d2, 0.0) * family.curvature_sign
    return value, d1, d2


def softmax_eval(scores, y: int):
    """Multinomial logistic loss at one score vector; ``y`` is a 1-based class."""
    s = np.asarray(scores, dtype=float)
    k = s.shape[0]
    if k < 2:
        raise DomainError("softmax needs k >= 2")
    if not np.all(np.isfinite(s)):
        raise DomainError("non-finite scores")
    if not (1 <= int(y) <= k) or int(y) != y:
        raise DomainError(f"class {y} outside 1..{k}")
    lse = logsumexp(s)
    p = np.exp(s - lse)
    value = lse - s[int(y) - 1]
    grad = p.copy()
    grad[int(y) - 1] -= 1.0

    def hvp(v):
        v = np.asarray(v, dtype=float)
        return p * v - p * (p @ v)

    return value, grad, hvp


class DenseFeatures:
    """Explicit n x d feature matrix behind the feature-operator interface."""

    def __init__(self, W):
        W = np.asarray(W, dtype=float)
        if W.ndim != 2:
            raise PreconditionError("features must be a 2-d array")
        self.W = np.ascontiguousarray(W)
        self.n, self.d = self.W.shape

    def matvec(self, x):
        return self.W @ x

    def rmatvec(self, r):
        return self.W.T @ r

    def rows(self, idx):
        return self.W[idx]

    def rows_matvec(self, idx, x):
        return self.W[idx] @ x

    def rows_rmatvec(self, idx, r):
        return self.W[idx].T @ r

    def row_blocks(self, block: int = 4096) -> Iterator[tuple[slice, np.ndarray]]:
        for start in range(0, self.n, block):
            sl = slice(start, min(start + block, self.n))
            yield sl, self.W[sl]

    def max_row_norm(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.sqrt(np.max(np.einsum("ij,ij->i", self.W, self.W))))


class FiniteSumProblem:
    """f(x) = (1/n) sum_i loss(w_i . x, y_i) over a feature operator.

    The problem is immutable after construction. Per-sample loss terms at the
    most recent x are memoized (guarded by a lock) because CG calls the
    Hessian-vector product many times at a fixed point.
    """

    def __init__(self, features, labels, loss: LossFamily):
        if not hasattr(features, "matvec"):
            features = DenseFeatures(features)
        self.features = features
        self.loss = loss
        self.n = features.n
        self.d = features.d
        if self.n < 1 or self.d < 1:
            raise PreconditionError("need n >= 1 and d >= 1")
        self.k = loss.n_classes if loss.kind == "softmax" else 1
        self.dim = self.d * self.k
        self.y = self._normalize_labels(np.asarray(labels, dtype=float).ravel())
        self.radius = float(loss.gsc_constant * features.max_row_norm())
        self._lock = threading.Lock()
        self._cache_key = None
        self._cache_val = None

    def _normalize_labels(self, y):
        if y.shape[0] != self.n:
            raise PreconditionError(f"{y.shape[0]} labels for {self.n} rows")
        if not np.all(np.isfinite(y)):
            raise DomainError("non-finite labels")
        kind = self.loss.kind
        if kind == "logistic":
            vals = set(np.unique(y).tolist())
            if vals <= {0.0, 1.0} and 0.0 in vals:
                log.warning("logistic labels in {0,1}; mapping 0 -> -1")
                y = np.where(y == 0.0, -1.0, 1.0)
            elif not vals <= {-1.0, 1.0}:
                raise DomainError("logistic labels must be in {-1,+1} or {0,1}")
        elif kind == "softmax":
            if np.any(y != np.round(y)) or y.min() < 1 or y.max() > self.k:
                raise DomainError(f"softmax labels must be integers in 1..{self.k}")
            y = y.astype(np.int64) - 1
        return y

    # -- parameter layout -------------------------------------------------
    def _param(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise PreconditionError(f"parameter has shape {x.shape}, expected ({self.dim},)")
        if self.k == 1:
            return x
        return x.reshape((self.d, self.k), order="F")

    def _flat(self, X):
        if self.k == 1:
            return X
        return X.reshape(-1, order="F")

    # -- per-sample terms ----------------------------------------------------
    def _terms_from_scores(self, scores, y):
        if self.k == 1:
            return loss_eval(self.loss, scores, y)
        lse = logsumexp(scores, axis=1)
        P = np.exp(scores - lse[:, None])
        m = scores.shape[0]
        values = lse - scores[np.arange(m), y]
        D1 = P.copy()
        D1[np.arange(m), y] -= 1.0
        return values, D1, P

    def terms(self, x):
        """(values, first derivatives, curvature) for every sample at x.

        For softmax the curvature entry is the probability matrix P; the
        per-sample Hessian block is diag(p) - p p'.
        """
        X = self._param(x)
        key = X.tobytes()
        with self._lock:
            if self._cache_key == key:
                return self._cache_val
        val = self._terms_from_scores(self.features.matvec(X), self.y)
        with self._lock:
            self._cache_key, self._cache_val = key, val
        return val

    def _softmax_apply(self, P, S):
        out = P * S - P * np.sum(P * S, axis=1, keepdims=True)
        return out * self.loss.curvature_sign

    # -- oracles -------------------------------------------------------------
    def objective(self, x, lam: float = 0.0) -> float:
        values, _, _ = self.terms(x)
        x = np.asarray(x, dtype=float)
        return float(np.mean(values) + 0.5 * lam * (x @ x))

    def gradient(self, x, lam: float = 0.0):
        _, D1, _ = self.terms(x)
        g = self._flat(self.features.rmatvec(D1)) / self.n
        return g + lam * np.asarray(x, dtype=float)

    def hessian_vec(self, x, lam: float, v):
        _, _, C = self.terms(x)
        V = self._param(v)
        S = self.features.matvec(V)
        if self.k == 1:
            Z = C * S
        else:
            Z = self._softmax_apply(C, S)
        return self._flat(self.features.rmatvec(Z)) / self.n + lam * np.asarray(v, dtype=float)

    def _check_dense(self):
        if self.dim > DENSE_DIM_LIMIT:
            raise CapacityError(
                f"dense Hessian of dimension {self.dim} exceeds the {DENSE_DIM_LIMIT} guard"
            )

    def _gram(self, rows, curv):
        """sum_i contribution_i for given rows and curvature entries."""
        if self.k == 1:
            return rows.T @ (curv[:, None] * rows)
        d, k = self.d, self.k
        A = np.einsum("ij,il->ijl", curv, -curv)
        A[:, np.arange(k), np.arange(k)] += curv
        A *= self.loss.curvature_sign
        G = np.empty((self.dim, self.dim))
        for j in range(k):
            for l in range(j, k):
                blk = rows.T @ (A[:, j, l][:, None] * rows)
                G[j * d:(j + 1) * d, l * d:(l + 1) * d] = blk
                G[l * d:(l + 1) * d, j * d:(j + 1) * d] = blk.T
        return G

    def hessian_dense(self, x, lam: float = 0.0):
        self._check_dense()
        _, _, C = self.terms(x)
        H = np.zeros((self.dim, self.dim))
        for sl, rows in self.features.row_blocks():
            H += self._gram(rows, C[sl])
        H /= self.n
        H = 0.5 * (H + H.T)
        H[np.diag_indices_from(H)] += lam
        return H

    def local_terms(self, x, idx):
        """Loss terms restricted to the rows ``idx`` (no full pass)."""
        X = self._param(x)
        scores = self.features.rows_matvec(idx, X)
        return self._terms_from_scores(scores, self.y[idx])

    def subsampled_hessian(self, x, idx, weights, mu: float):
        """(1/Q) sum_j weights_j * hess_{idx_j}(x) + mu I as a dense matrix."""
        self._check_dense()
        idx = np.asarray(idx)
        _, _, C = self.local_terms(x, idx)
        w = np.asarray(weights, dtype=float)
        rows = self.features.rows(idx)
        if self.k == 1:
            A = self._gram(rows, C * w)
        else:
            # the softmax block is not linear in P, so scale the rows instead
            A = self._gram(rows * np.sqrt(w)[:, None], C)
        A /= len(idx)
        A = 0.5 * (A + A.T)
        A[np.diag_indices_from(A)] += mu
        return A

    def row_factors(self, x, idx):
        """Per-sample Hessian factors G_i with hess_i = G_i G_i', shape (m, dim, r)."""
        idx = np.asarray(idx)
        _, _, C = self.local_terms(x, idx)
        rows = self.features.rows(idx)
        if self.k == 1:
            return (np.sqrt(np.maximum(C, 0.0))[:, None] * rows)[:, :, None]
        P = C
        sp = np.sqrt(P)
        # diag(sqrt p) - p sqrt(p)' squares to diag(p) - p p' because sum p = 1
        S = np.einsum("ij,jl->ijl", sp, np.eye(self.k)) - np.einsum("ij,il->ijl", P, sp)
        G = np.einsum("ijc,ir->ijrc", S, rows)
        return G.reshape(len(idx), self.dim, self.k)

    def batch_gradient(self, x, idx):
        """Unregularized gradient of the average loss over rows ``idx``."""
        idx = np.asarray(idx)
        X = self._param(x)
        _, D1, _ = self._terms_from_scores(self.features.rows_matvec(idx, X), self.y[idx])
        return self._flat(self.features.rows_rmatvec(idx, D1)) / len(idx)


def gsc_radius(problem: FiniteSumProblem) -> float:
    return problem.radius


@dataclass
class GscReport:
    third: float
    bound: float
    ratio: float
    passed: bool
    vacuous: bool = False


def check_gsc_inequality(problem: FiniteSumProblem, x, h, k_dir, slack: float = 1e-3) -> GscReport:
    """Finite-difference check of |D^3 f(x)[h, k, k]| <= R ||h|| D^2 f(x)[k, k].

    The third derivative is the derivative along h of k' H(.) k, estimated by
    central differences. ``ratio`` is |D^3| / (R ||h|| k'Hk), so a pass means
    ratio <= 1 + slack (up to a tiny absolute floor).
    """
    problem._check_dense()
    x, h, k_dir = (np.asarray(a, dtype=float) for a in (x, h, k_dir))
    R = problem.radius
    hn = float(np.linalg.norm(h))
    curv = float(k_dir @ problem.hessian_vec(x, 0.0, k_dir))
    if R == 0.0 or hn == 0.0:
        s = 1e-3 / max(hn, 1e-300)
        third = 0.0
        if hn > 0:
            up = k_dir @ problem.hessian_vec(x + s * h, 0.0, k_dir)
            dn = k_dir @ problem.hessian_vec(x - s * h, 0.0, k_dir)
            third = float((up - dn) / (2 * s))
        ok = abs(third) <= 1e-10 * max(1.0, abs(curv))
        return GscReport(third, 0.0, 0.0, ok, vacuous=True)
    s = 1e-3 / (R * hn)
    up = k_dir @ problem.hessian_vec(x + s * h, 0.0, k_dir)
    dn = k_dir @ problem.hessian_vec(x - s * h, 0.0, k_dir)
    third = float((up - dn) / (2 * s))
    bound = R * hn * curv
    floor = 1e-12 * R * hn * float(k_dir @ k_dir) * problem.features.max_row_norm() ** 2
    ratio = abs(third) / bound if bound > 0 else (0.0 if third == 0 else np.inf)
    passed = abs(third) <= bound * (1 + slack) + floor
    return GscReport(third, bound, float(ratio), bool(passed))


@dataclass
class SandwichReport:
    lo: float
    hi: float
    bound: float
    passed: bool


def hessian_equivalence_check(problem: FiniteSumProblem, x, h, lam: float, tol: float = 1e-9) -> SandwichReport:
    """Generalized eigenvalues of (H_lam(x + h), H_lam(x)) must lie in
    [exp(-R||h||), exp(R||h||)] up to ``tol``."""
    from scipy.linalg import eigh

    x, h = np.asarray(x, dtype=float), np.asarray(h, dtype=float)
    ev = eigh(problem.hessian_dense(x + h, lam), problem.hessian_dense(x, lam), eigvals_only=True)
    r = problem.radius * float(np.linalg.norm(h))
    lo, hi = float(ev.min()), float(ev.max())
    ok = lo >= math.exp(-r) * (1 - tol) - tol and hi <= math.exp(r) * (1 + tol) + tol
    return SandwichReport(lo, hi, r, bool(ok))
