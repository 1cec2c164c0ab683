import math

from gibbs_helper.models import grid_graph

from .base import BasePreset


class IsingGridPreset(BasePreset):
    name = "ising-3x3"
    description = "Ising model on the 3x3 grid, beta 0 -> ln 512"
    beta_max = math.log(512)

    def model(self):
        vertices, edges = grid_graph(3, 3)
        return {'type': 'ising', 'vertices': vertices,
                'edges': [list(e) for e in edges]}


class SingleEdgePreset(BasePreset):
    name = "single-edge"
    description = "Ising model on one edge, exact Z at beta = 1"
    task = 'exact'
    beta_max = 1.0

    def model(self):
        return {'type': 'ising', 'vertices': 2, 'edges': [[0, 1]]}
