import numpy as np
import pytest

from hetbeliefs.economy import assemble_economy
from hetbeliefs.filtering import prepare_beliefs
from hetbeliefs.model import parse_config
from hetbeliefs.verify import config_decoupled, config_standard_j1, config_standard_j2


def _build(doc):
    params, beliefs = parse_config(doc)
    prepare_beliefs(beliefs)
    coeffs = assemble_economy(params, beliefs)
    return params, beliefs, coeffs


@pytest.fixture(scope="session")
def econ_j1():
    return _build(config_standard_j1())


@pytest.fixture(scope="session")
def econ_j2():
    return _build(config_standard_j2())


@pytest.fixture(scope="session")
def econ_decoupled():
    return _build(config_decoupled())


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
