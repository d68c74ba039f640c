"""Nystrom-projected kernel problems.

With centers c_1..c_M and the upper-triangular T satisfying T'T = K_MM, the
projected model is g(x) = v(x)' T^{-1} alpha where v(x)_j = k(x, c_j). In the
alpha coordinates the problem is an ordinary finite-sum problem whose
(implicit) feature rows are phi_i = T^{-T} v(x_i), so the generic oracles,
preconditioner and globalization apply unchanged. Rows are streamed in
blocks; no n x n (or explicit n x M feature) matrix is ever stored.
"""
from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
from scipy.spatial.distance import cdist

from .errors import DomainError, FormatError, PreconditionError, SingularityError
from .globalization import GlobalizationConfig, solve
from .linsys import LEVERAGE_CAP, build_subsampled_preconditioner, leverage_scores, make_rng, sample_leverage
from .losses import FiniteSumProblem, LossFamily
from .newton import AnmConfig

BLOCK_ROWS = 4096
# K_nM is kept in memory when it has at most this many entries (32 MB);
# larger problems recompute kernel blocks on every pass.
KERNEL_CACHE_ENTRIES = 1 << 22
MAGIC = b"GSCNYM01"
KERNEL_IDS = {"gaussian": 0, "linear": 1}
LOSS_IDS = {"logistic": 0, "softmax": 1, "robust": 2, "squared": 3}

# Settings of the two large-scale runs; only meaningful at reduced n here.
PRESETS = {
    "susy": {"kernel": "gaussian", "sigma": 5.0, "M": 10_000, "Q": 10_000, "lam": 1e-10},
    "higgs": {"kernel": "gaussian", "sigma": 5.0, "M": 25_000, "Q": 25_000, "lam": 1e-9},
}


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("GSC_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_IDS:
            raise DomainError(f"unknown kernel {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise DomainError("Gaussian bandwidth must be positive")


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise PreconditionError("feature dimensions differ")
    if spec.kind == "linear":
        return float(x @ xp)
    diff = x - xp
    return float(np.exp(-(diff @ diff) / (2.0 * spec.sigma ** 2)))


def kernel_matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise PreconditionError("feature dimensions differ")
    if spec.kind == "linear":
        K = X @ Y.T
        if X is Y:
            K = 0.5 * (K + K.T)
        return K
    # direct differences: exact zeros on the diagonal and exact symmetry
    return np.exp(cdist(X, Y, "sqeuclidean") / (-2.0 * spec.sigma ** 2))


def kernel_diag_bound(spec: KernelSpec, X) -> float:
    """max_i sqrt(k(x_i, x_i))."""
    if spec.kind == "gaussian":
        return 1.0
    X = np.asarray(X, dtype=float)
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", X, X)))) if X.size else 0.0


def select_centers(X, M: int, method: str = "uniform", seed=0, kernel: KernelSpec | None = None,
                   t: float | None = None, cap: int = LEVERAGE_CAP) -> np.ndarray:
    """Indices of M Nystrom centers.

    uniform: M distinct rows. leverage: M i.i.d. draws with probability
    proportional to ridge leverage scores at level t, computed exactly on a
    uniform subsample of at most ``cap`` rows.
    """
    X = getattr(X, "X", X)
    n = X.shape[0]
    if not 1 <= M <= n:
        raise PreconditionError(f"need 1 <= M <= n, got M={M}, n={n}")
    rng = make_rng(seed)
    if method == "uniform":
        return np.arange(n) if M == n else np.sort(rng.choice(n, size=M, replace=False))
    if method != "leverage":
        raise PreconditionError(f"unknown center selection {method!r}")
    if kernel is None or t is None:
        raise PreconditionError("leverage selection needs a kernel and a level t")
    pool = np.arange(n) if n <= cap else np.sort(rng.choice(n, size=cap, replace=False))
    scores = leverage_scores(t, gram=kernel_matrix(kernel, X[pool], X[pool]), cap=cap)
    draws, _ = sample_leverage(scores, M, rng)
    return pool[draws]


def factor_T(spec: KernelSpec, centers):
    """Upper-triangular T with T'T = K_MM + jitter I. Returns (T, jitter)."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    M = centers.shape[0]
    if M < 1:
        raise PreconditionError("need at least one center")
    K = kernel_matrix(spec, centers, centers)
    scale = float(np.trace(K)) / M
    if not scale > 0:
        scale = 1.0
    jitter = 1e-12 * scale
    while jitter <= 1e-6 * scale * (1 + 1e-9):
        try:
            T = sla.cholesky(K + jitter * np.eye(M), lower=False)
            return T, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise SingularityError("K_MM not factorizable even with maximal jitter")


class NystromFeatures:
    """Implicit feature rows phi_i = T^{-T} v(x_i), streamed in row blocks."""

    def __init__(self, X, kernel: KernelSpec, centers, T, block: int = BLOCK_ROWS, threads: int | None = None,
                 cache_entries: int = KERNEL_CACHE_ENTRIES):
        self.X = np.ascontiguousarray(np.asarray(X, dtype=float))
        self.kernel = kernel
        self.centers = np.ascontiguousarray(np.asarray(centers, dtype=float))
        self.T = T
        self.n = self.X.shape[0]
        self.d = self.centers.shape[0]
        self.block = int(block)
        self.threads = thread_count() if threads is None else threads
        self._kappa = kernel_diag_bound(kernel, self.X)
        self._K = None
        if self.n * self.d <= cache_entries:
            self._K = kernel_matrix(kernel, self.X, self.centers)

    def _kblock(self, sl):
        if self._K is not None:
            return self._K[sl]
        return kernel_matrix(self.kernel, self.X[sl], self.centers)

    def _krows(self, idx):
        if self._K is not None:
            return self._K[idx]
        return kernel_matrix(self.kernel, self.X[idx], self.centers)

    def _slices(self):
        return [slice(s, min(s + self.block, self.n)) for s in range(0, self.n, self.block)]

    def _map(self, fn, items):
        if self.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                return list(ex.map(fn, items))
        return [fn(it) for it in items]

    def tinv(self, a):
        return sla.solve_triangular(self.T, a, lower=False)

    def tinv_t(self, a):
        return sla.solve_triangular(self.T, a, lower=False, trans="T")

    def matvec(self, a):
        u = self.tinv(a)
        return np.concatenate(self._map(lambda sl: self._kblock(sl) @ u, self._slices()))

    def rmatvec(self, r):
        parts = self._map(lambda sl: self._kblock(sl).T @ r[sl], self._slices())
        acc = parts[0]
        for p in parts[1:]:
            acc = acc + p
        return self.tinv_t(acc)

    def rows(self, idx):
        return self.tinv_t(self._krows(idx).T).T

    def rows_matvec(self, idx, a):
        return self._krows(idx) @ self.tinv(a)

    def rows_rmatvec(self, idx, r):
        return self.tinv_t(self._krows(idx).T @ r)

    def row_blocks(self, block: int | None = None):
        for sl in self._slices():
            yield sl, self.tinv_t(self._kblock(sl).T).T

    def max_row_norm(self) -> float:
        # ||phi_i||^2 = v_i' (K_MM + jitter)^{-1} v_i <= k(x_i, x_i)
        return self._kappa


class ProjectedProblem(FiniteSumProblem):
    """Finite-sum problem in the M reparametrized Nystrom coordinates."""

    def __init__(self, X, y, loss: LossFamily, kernel: KernelSpec, centers, T=None, jitter=None,
                 block: int = BLOCK_ROWS, threads: int | None = None,
                 cache_entries: int = KERNEL_CACHE_ENTRIES):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if T is None:
            T, jitter = factor_T(kernel, centers)
        self.kernel = kernel
        self.centers = centers
        self.T = T
        self.jitter = jitter
        super().__init__(NystromFeatures(X, kernel, centers, T, block, threads, cache_entries), y, loss)


def projected_gradient(pp: ProjectedProblem, alpha, mu: float):
    return pp.gradient(alpha, mu)


def projected_hvp(pp: ProjectedProblem, alpha, mu: float, p):
    return pp.hessian_vec(alpha, mu, p)


def compute_preconditioner(pp: ProjectedProblem, alpha, mu: float, Q: int, sampling: str = "uniform", seed=0):
    return build_subsampled_preconditioner(pp, alpha, mu, Q, sampling, seed)


@dataclass
class NystromModel:
    centers: np.ndarray
    T: np.ndarray
    alpha: np.ndarray
    kernel: KernelSpec
    lam: float
    loss: LossFamily
    jitter: float = 0.0

    def coefficients(self):
        """T^{-1} alpha (shape (M,) or (M, k) for softmax)."""
        a = self.alpha
        if self.loss.kind == "softmax":
            a = a.reshape((self.centers.shape[0], self.loss.n_classes), order="F")
        # fixed memory order keeps LAPACK on one code path (saved and loaded models agree bitwise)
        return sla.solve_triangular(np.asfortranarray(self.T), a, lower=False)


def predict(model: NystromModel, X, block: int = BLOCK_ROWS):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.centers.shape[1]:
        raise PreconditionError(f"rows have {X.shape[1]} features, model expects {model.centers.shape[1]}")
    c = model.coefficients()
    # explicit row reductions instead of BLAS so a score does not depend on the batch it sits in
    cb = c[None, :] if c.ndim == 1 else c[None, :, :]
    out = [np.sum((kernel_matrix(model.kernel, X[s:s + block], model.centers)[..., None] if c.ndim > 1
                   else kernel_matrix(model.kernel, X[s:s + block], model.centers)) * cb, axis=1)
           for s in range(0, X.shape[0], block)]
    return np.concatenate(out) if out else np.zeros((0,) + c.shape[1:])


def decision_labels(scores, loss: LossFamily):
    """+-1 by sign for binary losses, 1-based argmax for softmax, raw otherwise."""
    scores = np.asarray(scores)
    if loss.kind == "softmax":
        return np.argmax(scores, axis=1) + 1
    if loss.kind == "logistic":
        return np.where(scores >= 0, 1.0, -1.0)
    return scores


def kernel_solve(dataset, kernel: KernelSpec, lam: float, M: int, Q: int | None = None,
                 config: GlobalizationConfig | None = None, centers: str = "uniform", seed=0,
                 loss: LossFamily | None = None, block: int = BLOCK_ROWS, callback=None):
    """Fit a Nystrom model: pick centers, factor T, run the globalized solver.

    The default inner solver is PCG with tau=3 and a uniform Q-row
    preconditioner (Q defaults to M).
    """
    X, y = (dataset.X, dataset.y) if hasattr(dataset, "X") else dataset
    X = np.asarray(X, dtype=float)
    loss = loss or LossFamily.logistic()
    if not lam > 0:
        raise PreconditionError("lam must be positive")
    Q = M if Q is None else Q
    if config is None:
        config = GlobalizationConfig(anm=AnmConfig(solver="pcg", tau=3, Q=Q, seed=seed), seed=seed)
    elif config.anm.solver == "pcg" and config.anm.Q is None:
        config = replace(config, anm=replace(config.anm, Q=Q))
    idx = select_centers(X, M, centers, seed=seed, kernel=kernel, t=lam)
    C = X[idx]
    T, jitter = factor_T(kernel, C)
    pp = ProjectedProblem(X, y, loss, kernel, C, T, jitter, block=block)
    alpha, trace = solve(pp, lam, config, callback=callback)
    model = NystromModel(C, T, alpha, kernel, lam, loss, jitter)
    trace.config["centers"] = centers
    trace.config["M"] = M
    trace.config["Q"] = Q
    trace.config["jitter"] = jitter
    return model, trace


def save_model(model: NystromModel, path):
    """Flat little-endian layout: magic, M, p, kernel id, sigma, loss id, lam, jitter,
    centers (row-major), T (row-major), alpha."""
    if model.loss.kind == "softmax":
        raise FormatError("the binary model layout stores a single coefficient vector; softmax is unsupported")
    M, p = model.centers.shape
    head = MAGIC + struct.pack("<IIBdBdd", M, p, KERNEL_IDS[model.kernel.kind], float(model.kernel.sigma),
                               LOSS_IDS[model.loss.kind], float(model.lam), float(model.jitter))
    with open(path, "wb") as fh:
        fh.write(head)
        for arr in (model.centers, model.T, model.alpha):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


_HEAD = struct.Struct("<IIBdBdd")


def load_model(path) -> NystromModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise FormatError(f"{path}: bad magic")
    if len(raw) < 8 + _HEAD.size:
        raise FormatError(f"{path}: truncated header")
    M, p, kid, sigma, lid, lam, jitter = _HEAD.unpack_from(raw, 8)
    need = 8 + _HEAD.size + 8 * (M * p + M * M + M)
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(raw)}")
    kinds = {v: k for k, v in KERNEL_IDS.items()}
    losses = {v: k for k, v in LOSS_IDS.items()}
    if kid not in kinds or lid not in losses or losses[lid] == "softmax":
        raise FormatError(f"{path}: unknown kernel or loss id")
    body = np.frombuffer(raw, dtype="<f8", offset=8 + _HEAD.size).astype(float)
    centers = body[:M * p].reshape(M, p)
    T = body[M * p:M * p + M * M].reshape(M, M)
    alpha = body[M * p + M * M:]
    spec = KernelSpec(kinds[kid], sigma)
    return NystromModel(centers, T, alpha, spec, lam, LossFamily.from_name(losses[lid]), jitter)
