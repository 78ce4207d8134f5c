import numpy as np
import pytest
from scipy.integrate import quad

W0 = np.pi / 3


def first_order(gamma, width, h):
    """Samples of exp(gamma t) on [-width, 0] at spacing h (grid oracle building block)."""
    t = -np.arange(int(round(width / h)), -1, -1) * h
    return t, np.exp(gamma * t)


def grid_espline(gammas, length, h=1e-4):
    """E-spline built by repeated Riemann-sum convolution of first-order pieces.

    Returns grid times (support [-L, 0]) and values. Independent of the
    piecewise construction in the package.
    """
    w = length / len(gammas)
    _, vals = first_order(gammas[0], w, h)
    for g in gammas[1:]:
        _, nxt = first_order(g, w, h)
        vals = np.convolve(vals, nxt) * h
    t = -length + np.arange(len(vals)) * h
    return t, vals


def quad_integral(fn, a, b, points=None):
    val, _ = quad(fn, a, b, points=points, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# criterion lines collected by test_acceptance, repeated after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
