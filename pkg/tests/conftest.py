import numpy as np
import pytest

import helpers


@pytest.fixture(scope="session")
def natural512():
    return helpers.natural_image()


@pytest.fixture
def rng():
    return np.random.default_rng(987)
