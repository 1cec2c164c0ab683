import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from gibbs_helper.models import (  # noqa: E402
    IsingModel, PottsModel, complete_graph, grid_graph)
from gibbs_helper.sampling import Sampler, SamplerConfig  # noqa: E402

GRID_LEVEL_COUNTS = [2, 0, 8, 32, 46, 96, 144, 96, 46, 32, 8, 0, 2]
GRID_Q = math.log(512)


@pytest.fixture
def single_edge():
    return IsingModel(vertex_count=2, edges=((0, 1),))


@pytest.fixture
def ising_grid():
    vertices, edges = grid_graph(3, 3)
    return IsingModel(vertex_count=vertices, edges=tuple(edges))


@pytest.fixture
def potts_triangle():
    vertices, edges = complete_graph(3)
    return PottsModel(vertex_count=vertices, edges=tuple(edges),
                      color_count=3)


@pytest.fixture
def make_sampler():
    def make(seed=0, **settings):
        sampler_config = SamplerConfig(seed=seed, **settings)
        return Sampler(sampler_config, np.random.SeedSequence(seed))
    return make
