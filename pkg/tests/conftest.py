import numpy as np
import pytest

from smallnoise import builtin_model


@pytest.fixture(scope="session")
def wf():
    return builtin_model("wright_fisher", 1.0)


@pytest.fixture(scope="session")
def balancing():
    return builtin_model("balancing_selection", 1.0)


@pytest.fixture(scope="session")
def linear():
    return builtin_model("linear_feller", 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240819)
