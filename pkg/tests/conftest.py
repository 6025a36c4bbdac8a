import numpy as np
import pytest

from preflearn.channel import DiscreteNoiseChannel


def random_admissible_channel(rng: np.random.Generator, m: int = 3,
                              floor: float = 0.05) -> DiscreteNoiseChannel:
    """Random channel with entries bounded away from zero and a dominant
    diagonal, which keeps the capacity optimum interior."""
    base = rng.uniform(floor, 1.0, size=(m, m))
    base[np.diag_indices(m)] += 2.0
    base /= base.sum(axis=1, keepdims=True)
    return DiscreteNoiseChannel(base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
