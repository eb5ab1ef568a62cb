import numpy as np
import pytest

from speclab.models import MarkovModel, ModelPair
from speclab.probability import Distribution


@pytest.fixture
def canonical_pair():
    """Order-0 pair p=(0.5, 0.5), q=(0.8, 0.2): the worked instance used
    throughout the suite."""
    draft = MarkovModel(2, 0, np.array([[0.5, 0.5]]))
    target = MarkovModel(2, 0, np.array([[0.8, 0.2]]))
    return ModelPair(draft, target)


@pytest.fixture
def matched_pair():
    """p = q on a 4-token vocabulary."""
    m = MarkovModel(4, 0, np.array([[0.4, 0.3, 0.2, 0.1]]))
    return ModelPair(m, m)


def dist(*mass):
    return Distribution(np.array(mass, dtype=float))


@pytest.fixture
def d():
    return dist
