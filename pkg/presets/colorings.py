from gibbs_helper.models import complete_graph, cycle_graph

from .base import BasePreset


class _ColoringPreset(BasePreset):
    task = 'count-colorings'
    epsilon = 0.25
    color_count = 3
    graph = None

    def model(self):
        vertices, edges = self.graph()
        return {'type': 'potts', 'vertices': vertices,
                'edges': [list(e) for e in edges], 'k': self.color_count}


class PottsTrianglePreset(_ColoringPreset):
    name = "potts-k3"
    description = "proper 3-colorings of the triangle K3 (6)"

    @staticmethod
    def graph():
        return complete_graph(3)


class CycleColoringPreset(_ColoringPreset):
    name = "colorings-c5"
    description = "proper 3-colorings of the 5-cycle (30)"

    @staticmethod
    def graph():
        return cycle_graph(5)
