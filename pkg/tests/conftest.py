"""Shared fixtures: canned problems and small INI configs."""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from problem_model import (  # noqa: E402
    BoundaryCondition,
    BoundarySpec,
    MuInterval,
    ProblemSpec,
    Rectangle,
    ScalarFunction1D,
    SeparableSum,
    SeparableTerm,
    inlet_channel_problem,
    two_source_problem,
)

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def sine_poisson(mu=1.0, b=(0.0, 0.0)) -> ProblemSpec:
    """Unit square, f = 2 pi^2 sin(pi x) sin(pi y), u = 0 on the boundary.

    With mu = 1 and b = 0 the exact solution is sin(pi x) sin(pi y); with a
    parametric mu it is that divided by mu.
    """
    return ProblemSpec(
        domain=Rectangle(x0=0.0, x1=1.0, y0=0.0, y1=1.0),
        mu=mu,
        b=b,
        f=SeparableSum(
            terms=(
                SeparableTerm(
                    fx=ScalarFunction1D(kind="sine", params=(2.0 * np.pi ** 2, 1.0, 0.0)),
                    fy=ScalarFunction1D(kind="sine", params=(1.0, 1.0, 0.0)),
                ),
            )
        ),
        bc=BoundarySpec.all_dirichlet(),
    )


def exact_sine(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


@pytest.fixture
def poisson_problem() -> ProblemSpec:
    return sine_poisson()


@pytest.fixture
def parametric_poisson() -> ProblemSpec:
    return sine_poisson(mu=MuInterval(mu_min=1.0, mu_max=5.0))


@pytest.fixture
def two_source() -> ProblemSpec:
    return two_source_problem()


@pytest.fixture
def channel() -> ProblemSpec:
    return inlet_channel_problem()


@pytest.fixture
def inlet_only() -> ProblemSpec:
    """Bubble profile on the left, no forcing, pure diffusion."""
    wall = BoundaryCondition.dirichlet()
    return ProblemSpec(
        domain=Rectangle(x0=0.0, x1=2.0, y0=0.0, y1=1.0),
        mu=1.0,
        bc=BoundarySpec(
            left=BoundaryCondition.dirichlet(ScalarFunction1D(kind="bubble", params=(0.0, 1.0))),
            right=wall,
            bottom=wall,
            top=wall,
        ),
    )


@pytest.fixture
def fixture_path():
    def resolve(name: str) -> str:
        return str(FIXTURES / name)

    return resolve
