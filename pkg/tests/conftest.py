import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plumecpd import QGrid
from plumecpd.transport import ForwardModel


@pytest.fixture
def unit_fm() -> ForwardModel:
    """Forward model mapping a rate to a numerically equal measurement."""
    return ForwardModel(advection_velocity_mps=1.0, dispersion_factor_per_m=1.0)


@pytest.fixture
def coarse_grid() -> QGrid:
    return QGrid(0.0, 5.0, 0.25)


@pytest.fixture
def medium_grid() -> QGrid:
    return QGrid(0.0, 5.0, 0.05)
