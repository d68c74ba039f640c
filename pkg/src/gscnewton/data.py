"""Dataset ingestion (libsvm, CSV), standardization, splitting and synthetic generators."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyDatasetError, ParseError, PreconditionError, SchemaError
from .linsys import make_rng

MEMORY_LIMIT_BYTES = 2 * 1024 ** 3


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    flagged: tuple = ()
    provenance: str = ""
    notes: tuple = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def _guard(n: int, p: int, where: str = ""):
    if n * p * 8 > MEMORY_LIMIT_BYTES:
        raise SchemaError(f"{where}{n}x{p} dense matrix exceeds the 2 GiB ingestion guard")


def _check_finite(X, y, path):
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ParseError("non-finite value", path=path)


def load_libsvm(path, n_features: int | None = None) -> Dataset:
    """Read 'label idx:val ...' lines with 1-based strictly increasing indices."""
    path = os.fspath(path)
    labels, entries = [], []
    width = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ParseError(f"bad label {tokens[0]!r}", path, lineno) from None
            row, last = [], 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ParseError(f"bad feature token {tok!r}", path, lineno) from None
                if idx <= last:
                    raise ParseError(f"index {idx} not strictly increasing (or < 1)", path, lineno)
                if n_features is not None and idx > n_features:
                    raise SchemaError(f"{path}:{lineno}: index {idx} exceeds {n_features} features")
                last = idx
                row.append((idx - 1, val))
            width = max(width, last)
            entries.append(row)
    if not labels:
        raise EmptyDatasetError(f"{path}: no data rows")
    p = n_features if n_features is not None else width
    _guard(len(labels), p, f"{path}: ")
    X = np.zeros((len(labels), p))
    for i, row in enumerate(entries):
        for j, v in row:
            X[i, j] = v
    y = np.asarray(labels)
    _check_finite(X, y, path)
    return Dataset(X, y, provenance=f"libsvm:{path}")


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_libsvm(dataset: Dataset, path):
    """Write nonzero entries with shortest round-trip float repr (bit exact)."""
    with open(path, "w", encoding="utf-8") as fh:
        for xi, yi in zip(dataset.X, dataset.y):
            nz = np.flatnonzero(xi)
            feats = " ".join(f"{j + 1}:{float(xi[j])!r}" for j in nz)
            fh.write(f"{_fmt(yi)} {feats}".rstrip() + "\n")


def load_csv(path, label_column: int | str = 0) -> Dataset:
    """Read a CSV with a header row; ``label_column`` is a name or 0-based index."""
    path = os.fspath(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDatasetError(f"{path}: empty file")
        if isinstance(label_column, str):
            if label_column not in header:
                raise SchemaError(f"{path}: no column named {label_column!r}")
            lc = header.index(label_column)
        else:
            lc = int(label_column)
            if not -len(header) <= lc < len(header):
                raise SchemaError(f"{path}: label column {lc} out of range")
            lc %= len(header)
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                vals = [float(c) for c in rec]
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            labels.append(vals.pop(lc))
            rows.append(vals)
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")
    _guard(len(rows), len(header) - 1, f"{path}: ")
    X = np.asarray(rows, dtype=float).reshape(len(rows), len(header) - 1)
    y = np.asarray(labels)
    _check_finite(X, y, path)
    return Dataset(X, y, provenance=f"csv:{path}")


def load_any(path, label_column: int | str = 0) -> Dataset:
    if os.fspath(path).lower().endswith(".csv"):
        return load_csv(path, label_column)
    return load_libsvm(path)


def standardize(dataset: Dataset) -> Dataset:
    """Zero-mean, unit-variance columns. Constant columns are centered and flagged."""
    X = dataset.X
    if X.shape[0] < 2:
        raise PreconditionError("standardize needs at least two rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    flat = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    scale = np.where(flat, 1.0, std)
    Xs = (X - mean) / scale
    flagged = tuple(int(j) for j in np.flatnonzero(flat))
    notes = dataset.notes + ((f"zero-variance columns left unscaled: {list(flagged)}",) if flagged else ())
    return replace(dataset, X=Xs, mean=mean, std=scale, flagged=flagged, notes=notes)


def apply_standardization(dataset: Dataset, mean, std) -> Dataset:
    return replace(dataset, X=(dataset.X - mean) / std, mean=np.asarray(mean), std=np.asarray(std))


def split(dataset: Dataset, test_fraction: float, seed=0):
    """Seeded random partition into (train, test); row order is kept within parts."""
    if not 0 <= test_fraction < 1:
        raise PreconditionError("test_fraction must be in [0, 1)")
    n = dataset.n
    perm = make_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    part = lambda idx, tag: replace(dataset, X=dataset.X[idx], y=dataset.y[idx],
                                    provenance=f"{dataset.provenance}[{tag}]")
    return part(train_idx, "train"), part(test_idx, "test")


def synth_logistic(n: int, d: int, margin: float = 0.0, noise: float = 0.0, seed=0) -> Dataset:
    """Gaussian features labelled by a planted unit separator.

    Points are pushed at least ``margin`` away from the separating plane and
    each label is flipped with probability ``noise`` (the Bayes error).
    """
    if n < 1 or d < 1:
        raise PreconditionError("need n, d >= 1")
    rng = make_rng(seed)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    X = rng.standard_normal((n, d))
    side = np.where(X @ w >= 0, 1.0, -1.0)
    if margin > 0:
        X += (margin * side)[:, None] * w
    flip = rng.random(n) < noise
    y = np.where(flip, -side, side)
    return Dataset(X, y, provenance=f"synth_logistic(n={n},d={d},margin={margin},noise={noise},seed={seed})")


def synth_two_moons(n: int, noise: float = 0.1, seed=0) -> Dataset:
    """Two interleaved half circles in the plane, labels +1 (outer) and -1 (inner)."""
    if n < 1:
        raise PreconditionError("need n >= 1")
    rng = make_rng(seed)
    n_out = n // 2
    n_in = n - n_out
    a = rng.uniform(0.0, math.pi, n_out)
    b = rng.uniform(0.0, math.pi, n_in)
    outer = np.column_stack([np.cos(a), np.sin(a)])
    inner = np.column_stack([1.0 - np.cos(b), 0.5 - np.sin(b)])
    X = np.vstack([outer, inner]) + noise * rng.standard_normal((n, 2))
    y = np.concatenate([np.ones(n_out), -np.ones(n_in)])
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm], provenance=f"synth_two_moons(n={n},noise={noise},seed={seed})")


_SYNTH = {"logistic": (synth_logistic, {"n": int, "d": int, "margin": float, "noise": float}),
          "moons": (synth_two_moons, {"n": int, "noise": float})}


def parse_synth(spec: str, seed=0) -> Dataset:
    """Build a synthetic dataset from 'logistic:n=2000,d=20' or 'moons:n=500,noise=0.1'."""
    name, _, params = spec.partition(":")
    if name not in _SYNTH:
        raise PreconditionError(f"unknown synthetic generator {name!r}")
    fn, types = _SYNTH[name]
    kwargs = {}
    for item in filter(None, params.split(",")):
        key, sep, val = item.partition("=")
        if not sep or key not in types:
            raise PreconditionError(f"bad synthetic parameter {item!r}")
        try:
            kwargs[key] = types[key](val)
        except ValueError:
            raise PreconditionError(f"bad value in {item!r}") from None
    if name == "logistic":
        kwargs.setdefault("n", 1000)
        kwargs.setdefault("d", 10)
        kwargs.setdefault("noise", 0.1)
    else:
        kwargs.setdefault("n", 1000)
    return fn(seed=seed, **kwargs)
