import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("atclab", deadline=None, derandomize=True)
settings.load_profile("atclab")


@pytest.fixture
def rng():
    return np.random.default_rng(0xA7C0)
