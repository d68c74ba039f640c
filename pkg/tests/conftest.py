import numpy as np
import pytest

from gscnewton.losses import DenseFeatures, FiniteSumProblem, LossFamily

# 8 x 2 logistic fixture, used for golden values
W8 = np.array([[0.5, -1.2], [1.3, 0.4], [-0.7, 0.9], [2.0, -0.3],
               [-1.1, -1.4], [0.2, 0.8], [1.6, 1.1], [-0.4, -2.2]])
Y8 = np.array([1, -1, 1, 1, -1, -1, 1, -1], dtype=float)


def make_problem(W, y, loss):
    return FiniteSumProblem(DenseFeatures(np.asarray(W, dtype=float)), np.asarray(y, dtype=float), loss)


def random_problem(kind="logistic", n=30, d=4, k=3, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    W = scale * rng.standard_normal((n, d))
    if kind == "softmax":
        return make_problem(W, rng.integers(1, k + 1, n), LossFamily.softmax(k))
    if kind == "squared":
        return make_problem(W, rng.standard_normal(n), LossFamily.squared())
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    if kind == "robust":
        return make_problem(W, rng.standard_normal(n), LossFamily.robust())
    return make_problem(W, y, LossFamily.logistic())


@pytest.fixture
def tiny_logistic():
    return make_problem(W8, Y8, LossFamily.logistic())


@pytest.fixture
def small_logistic():
    return random_problem("logistic", n=40, d=4, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, in order, whatever the verbosity
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines.items()):
            terminalreporter.write_line(line)
