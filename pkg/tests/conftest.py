import numpy as np
import pytest

from agingheat.kernels import make_aging_exponential, make_classical_exponential, make_constant
from agingheat.pde_solver import Discretization, ProblemSpec, solve


def sin_mode(x):
    return np.sin(np.pi * x)


def zero(x):
    return 0.0 * x


def run(kernel, nx, nt, T=1.0, u0=sin_mode, u1=zero, F=None, **kw):
    p = ProblemSpec(kernel, u0, u1, F, T, **kw)
    return p, solve(p, Discretization.for_problem(p, nx, nt))


@pytest.fixture
def classical():
    return make_classical_exponential(1.0, 1.0)


@pytest.fixture
def aging_inv():
    return make_aging_exponential(lambda t: 1.0 / (1.0 + t), lambda t: -1.0 / (1.0 + t) ** 2)


@pytest.fixture
def wave_kernel():
    return make_constant(2.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
