import numpy as np
import pytest

from lansopt.control import ProblemConfig
from lansopt.spectral import GridSpec, zero_spectral


@pytest.fixture
def grid():
    return GridSpec(n=8, dt=0.02, n_steps=12)


@pytest.fixture
def plain_cfg(grid):
    zero = zero_spectral(grid)
    return ProblemConfig(
        grid, alpha=0.1, nu=0.5, gamma1=1.0, gamma2=1.0, gamma3=1.0,
        u0=zero, u_T=zero, u_d=zero,
    )


def spacetime_inner(grid, a, b):
    """Independent space-time inner product on stacked control arrays."""
    h = grid.length / grid.n
    return grid.dt * h**3 * float(np.sum(a * b))
