import numpy as np
import pytest

from roefield.line_operators import ConvKernelOp
from roefield.piecewise import PiecewisePolynomial


@pytest.fixture
def tent_pair():
    """Reference generator: tent multiplier and tent convolution profile on [-1, 1]."""
    return ConvKernelOp(PiecewisePolynomial.tent(), PiecewisePolynomial.tent())


def random_band(rng, size, band, symmetric=False):
    A = np.triu(np.tril(rng.standard_normal((size, size)), band), -band)
    return (A + A.T) / 2 if symmetric else A


def random_pp(rng, lo=-1.0, hi=1.0, pieces=3, degree=3, continuous=False):
    """Random piecewise polynomial on ``[lo, hi]``; optionally a continuous piecewise-linear one."""
    bp = np.sort(np.concatenate([[lo, hi], rng.uniform(lo, hi, pieces - 1)]))
    if continuous:
        vals = np.concatenate([[0.0], rng.standard_normal(pieces - 1), [0.0]])
        return PiecewisePolynomial.from_values(bp, vals)
    return PiecewisePolynomial(bp, rng.standard_normal((pieces, degree + 1)))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
