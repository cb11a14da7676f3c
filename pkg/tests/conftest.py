import numpy as np
import pytest

from tkgdistill.encoder import init_network_params
from tkgdistill.tkg import Quadruple, TemporalKG, Vocabulary


def random_kg(rng, n_entities=7, n_relations=3, horizon=8, n_events=25):
    quads = []
    for _ in range(n_events):
        s, o = rng.choice(n_entities, 2, replace=False)
        quads.append(
            Quadruple(int(s), int(rng.integers(n_relations)), int(o),
                      int(rng.integers(horizon)))
        )
    return TemporalKG(
        Vocabulary.integers(n_entities), Vocabulary.integers(n_relations),
        quads, horizon,
    )


@pytest.fixture
def toy_kg():
    return random_kg(np.random.default_rng(0))


@pytest.fixture
def toy_params(toy_kg):
    return init_network_params(
        len(toy_kg.entities), len(toy_kg.relations), 6, seed=1, dropout_rate=0.0
    )
