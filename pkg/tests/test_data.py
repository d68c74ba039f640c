
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from gscnewton.data import (Dataset, load_any, load_csv, load_libsvm, parse_synth, split, standardize,
                            synth_logistic, synth_two_moons, write_libsvm)
from gscnewton.errors import EmptyDatasetError, ParseError, PreconditionError, SchemaError
from gscnewton.losses import LossFamily, loss_eval
from gscnewton.nystrom import KernelSpec, kernel_matrix


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_libsvm_single_line(tmp_path):
    ds = load_libsvm(write(tmp_path, "a.svm", "+1 1:0.5 3:2.0\n"))
    np.testing.assert_array_equal(ds.X, [[0.5, 0.0, 2.0]])
    assert ds.y.tolist() == [1.0]


def test_libsvm_comments_and_blank_lines(tmp_path):
    ds = load_libsvm(write(tmp_path, "a.svm", "# header\n\n-1 2:1\n+1 1:3 # trailing\n"))
    np.testing.assert_array_equal(ds.X, [[0.0, 1.0], [3.0, 0.0]])
    np.testing.assert_array_equal(ds.y, [-1.0, 1.0])


def test_libsvm_empty_file(tmp_path):
    with pytest.raises(EmptyDatasetError):
        load_libsvm(write(tmp_path, "e.svm", ""))


@pytest.mark.parametrize("text,line", [("1 1:2\n1 2:x\n", 2), ("1 1:2\n\n1 3:1 2:1\n", 3),
                                       ("abc 1:1\n", 1), ("1 0:1\n", 1), ("1 1-2\n", 1)])
def test_libsvm_parse_errors_carry_line(tmp_path, text, line):
    with pytest.raises(ParseError) as exc:
        load_libsvm(write(tmp_path, "bad.svm", text))
    assert exc.value.line == line
    assert f"bad.svm:{line}" in str(exc.value)


def test_libsvm_width_schema(tmp_path):
    with pytest.raises(SchemaError):
        load_libsvm(write(tmp_path, "w.svm", "1 5:1\n"), n_features=3)


def test_libsvm_non_finite(tmp_path):
    with pytest.raises(ParseError):
        load_libsvm(write(tmp_path, "n.svm", "1 1:nan\n"))


def test_libsvm_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 6)) * 10.0 ** rng.integers(-300, 300, (30, 6))
    X[rng.random((30, 6)) < 0.3] = 0.0
    X[:, -1] = 1.0 / 3.0  # last column always present so the width survives
    y = rng.choice([-1.0, 1.0], 30)
    path = tmp_path / "rt.svm"
    write_libsvm(Dataset(X, y), path)
    back = load_libsvm(path)
    assert back.X.tobytes() == X.tobytes() and back.y.tobytes() == y.tobytes()


def test_csv_by_name_and_index(tmp_path):
    path = write(tmp_path, "d.csv", "a,label,b\n1,1,2\n3,-1,4\n")
    by_name = load_csv(path, "label")
    by_index = load_csv(path, 1)
    np.testing.assert_array_equal(by_name.X, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(by_name.y, [1, -1])
    np.testing.assert_array_equal(by_name.X, by_index.X)
    assert load_any(path, "label").provenance.startswith("csv:")


def test_csv_errors(tmp_path):
    with pytest.raises(EmptyDatasetError):
        load_csv(write(tmp_path, "e.csv", ""))
    with pytest.raises(EmptyDatasetError):
        load_csv(write(tmp_path, "h.csv", "y,a\n"))
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "r.csv", "y,a\n1,2\n1,2,3\n"))
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "c.csv", "y,a\n1,2\n"), "z")
    with pytest.raises(ParseError) as exc:
        load_csv(write(tmp_path, "p.csv", "y,a\n1,2\n1,oops\n"))
    assert exc.value.line == 3


def test_standardize_two_values():
    ds = standardize(Dataset(np.array([[1.0], [3.0]]), np.array([1.0, -1.0])))
    np.testing.assert_array_equal(ds.X[:, 0], [-1.0, 1.0])


def test_standardize_flags_constant_columns():
    X = np.column_stack([np.arange(5.0), np.full(5, 7.0)])
    ds = standardize(Dataset(X, np.ones(5)))
    assert ds.flagged == (1,)
    np.testing.assert_array_equal(ds.X[:, 1], 0.0)
    assert ds.notes


def test_standardize_needs_two_rows():
    with pytest.raises(PreconditionError):
        standardize(Dataset(np.ones((1, 2)), np.ones(1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40), st.integers(1, 5))
def test_standardize_moments_and_idempotence(seed, n, p):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p)) * rng.uniform(0.1, 100, p) + rng.uniform(-50, 50, p)
    once = standardize(Dataset(X, np.ones(n)))
    keep = [j for j in range(p) if j not in once.flagged]
    assert np.all(np.abs(once.X.mean(axis=0)) <= 1e-12)
    np.testing.assert_allclose(once.X[:, keep].std(axis=0), 1.0, rtol=1e-12)
    twice = standardize(once)
    np.testing.assert_allclose(twice.X, once.X, atol=1e-12, rtol=0)


def test_split_sizes():
    ds = Dataset(np.arange(10.0)[:, None], np.ones(10))
    train, test = split(ds, 0.2, seed=0)
    assert (train.n, test.n) == (8, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.floats(0.0, 0.95), st.integers(0, 1000))
def test_split_is_seeded_partition(n, frac, seed):
    ds = Dataset(np.arange(float(n))[:, None], np.ones(n))
    a_tr, a_te = split(ds, frac, seed)
    b_tr, b_te = split(ds, frac, seed)
    assert np.array_equal(a_tr.X, b_tr.X) and np.array_equal(a_te.X, b_te.X)
    joined = np.sort(np.concatenate([a_tr.X[:, 0], a_te.X[:, 0]]))
    assert np.array_equal(joined, np.arange(float(n)))


def test_split_rejects_bad_fraction():
    ds = Dataset(np.ones((4, 1)), np.ones(4))
    with pytest.raises(PreconditionError):
        split(ds, 1.0)


def test_generators_are_byte_deterministic():
    for make in (lambda s: synth_logistic(200, 5, noise=0.1, seed=s), lambda s: synth_two_moons(200, 0.2, seed=s)):
        a, b, c = make(4), make(4), make(5)
        assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
        assert a.X.tobytes() != c.X.tobytes()


def test_parse_synth():
    ds = parse_synth("logistic:n=50,d=3,noise=0", seed=2)
    assert ds.X.shape == (50, 3)
    assert parse_synth("moons:n=30", seed=1).X.shape == (30, 2)
    for bad in ("cubes:n=3", "logistic:n=x", "logistic:k=3", "logistic:n"):
        with pytest.raises(PreconditionError):
            parse_synth(bad)


def test_noiseless_logistic_is_separable():
    # oracle: weakly regularized logistic regression via L-BFGS
    ds = synth_logistic(2000, 10, noise=0.0, seed=0)
    fam = LossFamily.logistic()

    def fg(w):
        v, d1, _ = loss_eval(fam, ds.X @ w, ds.y)
        return v.mean() + 0.5e-6 * w @ w, ds.X.T @ d1 / ds.n + 1e-6 * w

    w = minimize(fg, np.zeros(10), jac=True, method="L-BFGS-B", options={"maxiter": 5000}).x
    err = np.mean(np.sign(ds.X @ w) != ds.y)
    assert err <= 1e-3


def test_two_moons_kernel_error():
    # oracle: full kernel logistic fit (M = n) on the representer fixed point
    train = synth_two_moons(300, 0.1, seed=0)
    test = synth_two_moons(1000, 0.1, seed=1)
    spec = KernelSpec("gaussian", 0.5)
    lam, n = 1e-4, train.n
    K = kernel_matrix(spec, train.X, train.X)
    fam = LossFamily.logistic()
    g = np.zeros(n)
    for _ in range(100):
        _, d1, d2 = loss_eval(fam, g, train.y)
        F = g + K @ d1 / (n * lam)
        if np.linalg.norm(F) < 1e-12:
            break
        g = g - np.linalg.solve(np.eye(n) + K * (d2 / (n * lam))[None, :], F)
    c = -loss_eval(fam, g, train.y)[1] / (n * lam)
    scores = kernel_matrix(spec, test.X, train.X) @ c
    assert np.mean(np.sign(scores) != test.y) < 0.05
