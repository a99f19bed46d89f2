import math

import numpy as np
import pytest

from weakprobe.config import SimulationConfig
from weakprobe.core import PAULI_X, PAULI_Y, PAULI_Z, Observable, dagger
from weakprobe.experiment import MzConfig, mz_setup
from weakprobe.randomness import random_unitary


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def paulis():
    return PAULI_X, PAULI_Y, PAULI_Z


@pytest.fixture
def mz_quarter():
    """Interferometer at delta = pi/2 with full visibility and unpolarized probe."""
    return mz_setup(MzConfig(delta=math.pi / 2))


@pytest.fixture
def remixed_qutrit(rng):
    """
    One qutrit observable with a doubled eigenvalue, built twice from bases
    that differ by a random rotation inside the doubled eigenspace.
    """
    evals = np.diag([0.3, 0.3, -0.8])
    u = random_unitary(3, rng)
    block = np.eye(3, dtype=np.complex128)
    block[:2, :2] = random_unitary(2, rng)
    observables = []
    for basis in (u, u @ block):
        mat = basis @ evals @ dagger(basis)
        observables.append(Observable((mat + dagger(mat)) / 2.0))
    return tuple(observables)


@pytest.fixture(autouse=True)
def fresh_config_cache():
    SimulationConfig.reset()
    yield
    SimulationConfig.reset()
