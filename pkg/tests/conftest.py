import numpy as np
import pytest

from layerdag.sem_model import Dag, generate_ba, make_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dag(rng, p, density=0.4):
    """Random DAG: edges only from lower to higher position in a random order."""
    order = rng.permutation(p)
    edges = [(int(order[a]), int(order[b])) for a in range(p) for b in range(a + 1, p)
             if rng.random() < density]
    return Dag(p, frozenset(edges))


def small_ba_model(seed, p=6, noise="uniform"):
    return make_model(generate_ba(p, 2, seed=seed), noise, seed=seed)
