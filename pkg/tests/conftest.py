import numpy as np
import pytest

from core import profiles
from core.profiles import SolitonParams
from core.spectral_ops import Grid
from services import evolution
from services.evolution import Trajectory


@pytest.fixture
def grid():
    """Cheap grid for evolution and operator tests"""
    return Grid(1024, 100.0)


@pytest.fixture
def box_grid():
    """The default box, where the torus tails of Q are small"""
    return Grid(4096, 400.0)


@pytest.fixture
def spectral_grid():
    """Small enough for dense eigensolves"""
    return Grid(512, 100.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def translating_soliton(grid: Grid, times, c: float = 1.0, x0: float = 0.0) -> Trajectory:
    """Exact translates Q_c(x - x0 - c t), with their invariants"""
    times = np.asarray(times, dtype=np.float64)
    snapshots = [profiles.soliton(SolitonParams(c=c, x0=x0 + c * t), grid) for t in times]
    pairs = [evolution.invariants(u) for u in snapshots]
    return Trajectory(
        times=times,
        snapshots=snapshots,
        invariants={
            "mass": np.array([m for m, _ in pairs]),
            "energy": np.array([e for _, e in pairs]),
        },
    )


@pytest.fixture
def soliton_trajectory(box_grid):
    return translating_soliton(box_grid, np.linspace(0.0, 8.0, 9))


@pytest.fixture
def soliton_translates():
    return translating_soliton
