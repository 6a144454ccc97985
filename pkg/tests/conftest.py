"""Shared fixtures: standard grids, ball densities and one converged solve."""

import numpy as np
import pytest

from src.fields import DensityField, RadialGrid
from src.mtf import build_scaled_problem
from src.selftest import ball_grid as make_ball_grid
from src.selftest import reference_solve, uniform_ball


@pytest.fixture(scope="session")
def ball_grid() -> RadialGrid:
    """Linear grid on [0, 3] with a shell edge at r = 1."""
    return make_ball_grid(m=200, extent=3.0)


@pytest.fixture(scope="session")
def unit_ball(ball_grid) -> DensityField:
    return uniform_ball(ball_grid, charge=1.0, radius=1.0)


@pytest.fixture(scope="session")
def log_grid() -> RadialGrid:
    return RadialGrid.logarithmic(20.0, 400, 1e-5)


@pytest.fixture(scope="session")
def gaussian(log_grid) -> DensityField:
    return DensityField(grid=log_grid, values=np.exp(-(log_grid.nodes**2)))


@pytest.fixture(scope="session")
def small_problem():
    """Scaled problem at μ̃ = 0, T̃ = 0.5, β = 1 on 200 nodes."""
    return build_scaled_problem(0.0, 0.5, beta=1.0, z=1.0, n=200)


@pytest.fixture(scope="session")
def converged():
    """(problem, report) of a tightly converged solve, shared with the self-test battery."""
    return reference_solve()
