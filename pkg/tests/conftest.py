"""Shared fixtures: coarse grids and designs that keep tests fast."""

import numpy as np
import pytest

from hygroplan import BoundaryDesign, Grid1D, wood_fibre

HOUR = 3600.0


@pytest.fixture(scope="session")
def model():
    return wood_fibre()


@pytest.fixture(scope="session")
def grid():
    return Grid1D(n_cells=50, length=0.08)


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid1D(n_cells=25, length=0.08)


@pytest.fixture(scope="session")
def step_design():
    """Single upward step 10% -> 75% held for 48 h (short design 2 analogue)."""
    return BoundaryDesign("step", 0.10, ((48.0 * HOUR, 0.75),))


@pytest.fixture(scope="session")
def equilibrium_design():
    """Ambient equal to the initial state: nothing should happen."""
    return BoundaryDesign("eq", 0.33, ((24.0 * HOUR, 0.33),))


@pytest.fixture(scope="session")
def output_times_48h():
    return np.linspace(0.0, 48.0 * HOUR, 97)
