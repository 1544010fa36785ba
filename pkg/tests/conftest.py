import math

import numpy as np
import pytest

from src.analysis.bapu import BapuSystem
from src.analysis.grid import Grid, VectorSignal
from src.models.schemas import CoveringParams


@pytest.fixture
def grid():
    """The reference box [-16 pi, 16 pi) with 1024 points."""
    return Grid(n=1, T=16 * math.pi, M=1024)


@pytest.fixture
def small_grid():
    return Grid(n=1, T=8 * math.pi, M=512)


@pytest.fixture
def half_params():
    return CoveringParams(alpha=0.5, Kmax=6)


@pytest.fixture
def half_system(half_params):
    return BapuSystem(half_params)


@pytest.fixture
def flat_params():
    """alpha = 0 with a = pi: unit cubes and unit radii."""
    return CoveringParams(alpha=0.0, a=math.pi, Kmax=8)


@pytest.fixture
def gaussian(grid):
    x = grid.axis()
    return VectorSignal(grid, np.exp(-(x**2) / 2.0)[None].astype(complex))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tight_frame():
    """Uniform covering on a box every cube lattice tiles exactly."""
    from src.analysis.frame import FrameSystem
    from src.analysis.grid import commensurate_halfwidth

    params = CoveringParams(alpha=0.0, Kmax=8)
    grid = Grid(n=1, T=commensurate_halfwidth(params.a, 64), M=1024)
    return FrameSystem(BapuSystem(params), grid)
