import numpy as np
import pytest

from vtlsim.world import WorldConfig, build_world


@pytest.fixture(scope="session")
def world():
    return build_world(WorldConfig())


@pytest.fixture(scope="session")
def empty_world():
    return build_world(WorldConfig(pillar_rows=0, pillar_cols=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
