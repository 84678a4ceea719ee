"""Shared fixtures and hypothesis strategies."""

import math

import numpy as np
import pytest
from hypothesis import strategies as st

from cavity_teleport.dynamics import SystemParams
from cavity_teleport.protocol import InputState, ProtocolSchedule

SQRT_HALF = 1.0 / math.sqrt(2.0)


@pytest.fixture(scope="session")
def cs():
    """Cs reference values with the quoted detector efficiency."""
    return SystemParams.cesium(eta=0.6)


@pytest.fixture(scope="session")
def cs_ideal():
    return SystemParams.cesium(eta=1.0)


@pytest.fixture(scope="session")
def cs_schedule(cs):
    return ProtocolSchedule.default(cs)


@pytest.fixture(scope="session")
def even_input():
    return InputState(SQRT_HALF, SQRT_HALF)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, dim=36):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


@st.composite
def underdamped_params(draw, lossless=False):
    """Strong-coupling parameter sets with g fixed at 1 (rates in units of g)."""
    if lossless:
        return SystemParams(g=1.0, kappa=0.0, gamma=0.0)
    kappa = draw(st.floats(0.0, 2.0))
    gamma = draw(st.floats(0.0, 2.0))
    return SystemParams(g=1.0, kappa=kappa, gamma=gamma)


@st.composite
def input_states(draw):
    theta = draw(st.floats(0.0, math.pi / 2))
    phase = draw(st.floats(0.0, 2 * math.pi))
    return InputState(math.cos(theta), math.sin(theta) * complex(math.cos(phase), math.sin(phase)))
