import numpy as np
import pytest

from hvsampling.design import validate_design


@pytest.fixture(scope="session")
def worked_design():
    """The 3-unit design used for every hand-checked value.

    pi = (0.5, 0.7, 0.8), n = 2.  Working-size distribution
    delta = (0.24, 0.76); split vectors (5/12, 7/12, 1) and
    (10/19, 14/19, 14/19); sample probabilities {1,2} 0.2, {1,3} 0.3,
    {2,3} 0.5.
    """
    return validate_design(np.array([0.5, 0.7, 0.8]))


@pytest.fixture
def np_rng():
    return np.random.default_rng(20260822)
