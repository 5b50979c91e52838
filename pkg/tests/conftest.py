from __future__ import annotations

import numpy as np
import pytest

from mrme import Continuous, Discrete, QuantizationSchema, SpaceSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_spaces():
    """One continuous obs dim on [0, 1], one 3-way discrete action dim."""
    return SpaceSpec((Continuous(0.0, 1.0),)), SpaceSpec((Discrete(3),))


@pytest.fixture
def unit_schema(unit_spaces):
    obs, act = unit_spaces
    return QuantizationSchema.from_spaces(obs, act, k=2)


@pytest.fixture
def mixed_spaces():
    """Two continuous + one discrete obs dim; continuous + discrete action."""
    obs = SpaceSpec((Continuous(-1.2, 0.6), Continuous(-0.07, 0.07), Discrete(4)))
    act = SpaceSpec((Continuous(-1.0, 1.0), Discrete(3)))
    return obs, act


@pytest.fixture
def mixed_schema(mixed_spaces):
    obs, act = mixed_spaces
    return QuantizationSchema.from_spaces(obs, act, k=3)


def random_value(space: SpaceSpec, rng: np.random.Generator) -> tuple:
    return space.sample(rng)
