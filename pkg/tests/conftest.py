import os

import numpy as np
import pytest

from isci.channel_stats import ScatteringFunction, build_second_order
from isci.grid import GridConfig, PrototypePair
from isci.layout import build_equally_spaced_layout

# keep the suite hermetic: never read or write a user stats cache
os.environ.pop("ISCI_CACHE_DIR", None)


@pytest.fixture(scope="session")
def grid():
    return GridConfig(M=6, N=4)


@pytest.fixture(scope="session")
def small_grid():
    return GridConfig(M=3, N=2)


@pytest.fixture(scope="session")
def pair(grid):
    return PrototypePair.for_grid(grid)


@pytest.fixture(scope="session")
def layout(grid):
    return build_equally_spaced_layout(grid, pilot_density=0.25)


@pytest.fixture(scope="session")
def scattering(grid):
    return ScatteringFunction.from_spread_factor(1e-3, grid)


@pytest.fixture(scope="session")
def stats(grid, pair, scattering):
    return build_second_order(grid, pair, scattering)


@pytest.fixture(scope="session")
def stats_zero(grid, pair):
    return build_second_order(grid, pair, ScatteringFunction.from_spread_factor(0.0, grid))


@pytest.fixture(scope="session")
def small_stats(small_grid):
    return build_second_order(small_grid, PrototypePair.for_grid(small_grid),
                              ScatteringFunction.from_spread_factor(1e-3, small_grid))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_psd(rng, dim, rank=None):
    rank = rank or dim
    X = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    return X @ X.conj().T / rank


@pytest.fixture(scope="session")
def snr_sweep():
    """Default SNR sweep (6 x 4 grid, spread factor 1e-3, 2000 draws)."""
    from isci.experiments import SweepPlan, run_snr_sweep
    return run_snr_sweep(SweepPlan())
