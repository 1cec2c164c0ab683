import logging
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import networkx as nx
import numpy as np
from scipy.special import logsumexp

from .config import config, load_document
from .errors import (
    DegenerateError, EnumerationInfeasible, PreconditionError,
    ValidationError)
from .util import INF, scaled_energies

logger = logging.getLogger(__name__)


def enumeration_cap():
    return int(config['ENUMERATION_CAP'])


class Hamiltonian:
    """ Integer energies H: Omega -> {0, ..., n} over a mixed-radix state
        space: `site_count` sites, each taking a value in
        {0, ..., site_values - 1}. State index = sum_v x_v * site_values^v.

        Subclasses provide `local_energies(configuration, site)`: the energy
        contribution of every value of `site` with the other sites fixed.
    """
    site_count = None
    site_values = None
    max_energy = None

    @property
    def state_count(self):
        return self.site_values ** self.site_count

    @property
    def log_state_count(self):
        """ q = ln |Omega|.
        """
        return self.site_count * math.log(self.site_values)

    def config_from_index(self, state_index):
        digits = []
        for _ in range(self.site_count):
            state_index, digit = divmod(state_index, self.site_values)
            digits.append(digit)
        return np.array(digits, dtype=np.int64)

    def index_from_config(self, configuration):
        index = 0
        for digit in reversed([int(x) for x in configuration]):
            index = index * self.site_values + digit
        return index

    def energy_of(self, configuration):
        raise NotImplementedError

    def local_energies(self, configuration, site):
        raise NotImplementedError

    def energy(self, state_index):
        return int(self.energy_of(self.config_from_index(state_index)))

    def energy_delta(self, configuration, site, value):
        local = self.local_energies(configuration, site)
        return int(local[value] - local[configuration[site]])

    def check_enumerable(self, cap=None):
        cap = enumeration_cap() if cap is None else cap
        if self.state_count > cap:
            raise EnumerationInfeasible(
                f"|Omega| = {self.state_count} exceeds the enumeration cap "
                f"{cap}")

    def energies(self, cap=None):
        """ Energy of every state, in state-index order.
        """
        self.check_enumerable(cap)
        return self._energy_table

    def level_counts(self, cap=None):
        """ N(E) = |{x : H(x) = E}| for E = 0..n.
        """
        self.check_enumerable(cap)
        return self._level_counts

    @cached_property
    def _level_counts(self):
        return np.bincount(self._energy_table, minlength=self.max_energy + 1)

    @cached_property
    def _energy_table(self):
        raise NotImplementedError


def _validated_edges(vertex_count, edges):
    if vertex_count < 1:
        raise ValidationError("must be a positive integer", "vertices")
    graph = nx.Graph()
    graph.add_nodes_from(range(vertex_count))
    for i, edge in enumerate(edges):
        if len(edge) != 2:
            raise ValidationError("edge must be a pair", f"edges[{i}]")
        u, v = (int(x) for x in edge)
        if not (0 <= u < vertex_count and 0 <= v < vertex_count):
            raise ValidationError("vertex out of range", f"edges[{i}]")
        if u == v:
            raise ValidationError("self-loop", f"edges[{i}]")
        if graph.has_edge(u, v):
            raise ValidationError("duplicate edge", f"edges[{i}]")
        graph.add_edge(u, v)
    return tuple(sorted(tuple(sorted(e)) for e in graph.edges()))


@dataclass(frozen=True)
class GraphHamiltonian(Hamiltonian):
    """ Edge-local Hamiltonian: H(x) counts edges whose endpoint pair is
        "bad" for the model.
    """
    vertex_count: int
    edges: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self, 'edges', _validated_edges(self.vertex_count, self.edges))

    @property
    def site_count(self):
        return self.vertex_count

    @property
    def max_energy(self):
        return len(self.edges)

    @cached_property
    def neighbors(self):
        adjacent = [[] for _ in range(self.vertex_count)]
        for u, v in self.edges:
            adjacent[u].append(v)
            adjacent[v].append(u)
        return tuple(tuple(a) for a in adjacent)

    def _edge_is_bad(self, left, right):
        raise NotImplementedError

    def energy_of(self, configuration):
        configuration = np.asarray(configuration)
        return int(sum(self._edge_is_bad(configuration[u], configuration[v])
                       for u, v in self.edges))

    def local_energies(self, configuration, site):
        values = np.arange(self.site_values)
        local = np.zeros(self.site_values, dtype=np.int64)
        for other in self.neighbors[site]:
            local += self._edge_is_bad(values, configuration[other])
        return local

    @cached_property
    def _energy_table(self):
        index = np.arange(self.state_count, dtype=np.int64)
        table = np.zeros(self.state_count, dtype=np.int64)
        for u, v in self.edges:
            digit_u = (index // self.site_values ** u) % self.site_values
            digit_v = (index // self.site_values ** v) % self.site_values
            table += self._edge_is_bad(digit_u, digit_v)
        return table


@dataclass(frozen=True)
class IsingModel(GraphHamiltonian):
    """ Ferromagnetic Ising model: H(x) = number of disagreeing edges.
    """
    site_values = 2

    def _edge_is_bad(self, left, right):
        return np.not_equal(left, right).astype(np.int64)


@dataclass(frozen=True)
class PottsModel(GraphHamiltonian):
    """ k-state Potts model: H(x) = number of monochromatic edges, so
        Z(inf) counts proper k-colorings. Colors are stored as 0..k-1.
    """
    color_count: int = 3

    def __post_init__(self):
        super().__post_init__()
        if self.color_count < 2:
            raise ValidationError("k must be >= 2", "k")

    @property
    def site_values(self):
        return self.color_count

    def _edge_is_bad(self, left, right):
        return np.equal(left, right).astype(np.int64)


@dataclass(frozen=True)
class LookupHamiltonian(Hamiltonian):
    """ Explicit energy table; one site whose value is the state index.
    """
    table: Tuple[int, ...]

    def __post_init__(self):
        table = tuple(int(e) for e in self.table)
        if not table:
            raise ValidationError("must not be empty", "energies")
        if min(table) < 0:
            raise ValidationError("energies must be >= 0", "energies")
        if min(table) != 0:
            raise ValidationError(
                "at least one state must have energy 0", "energies")
        object.__setattr__(self, 'table', table)

    site_count = 1

    @property
    def site_values(self):
        return len(self.table)

    @property
    def max_energy(self):
        return max(self.table)

    def energy_of(self, configuration):
        return self.table[int(configuration[0])]

    def local_energies(self, configuration, site):
        return self._energy_table

    @cached_property
    def _energy_table(self):
        return np.array(self.table, dtype=np.int64)


@dataclass(frozen=True)
class Moments:
    mean: float
    second_moment: float

    @property
    def relative_variance(self):
        return self.second_moment / self.mean ** 2


def _log_weights(h, beta, cap=None):
    """ ln N(E) - beta E for every populated level E.
    """
    counts = h.level_counts(cap)
    levels = np.nonzero(counts)[0]
    if counts[0] == 0:
        raise PreconditionError("Hamiltonian has no zero-energy state")
    return np.log(counts[levels]) - scaled_energies(beta, levels)


def log_partition_function(h, beta, cap=None):
    return float(logsumexp(_log_weights(h, beta, cap)))


def exact_partition_function(h, beta, cap=None):
    """ Z(beta) = sum_x exp(-beta H(x)); beta = inf counts ground states.
    """
    return math.exp(log_partition_function(h, beta, cap))


def exact_gibbs_distribution(h, beta, cap=None):
    log_z = log_partition_function(h, beta, cap)
    return np.exp(-scaled_energies(beta, h.energies(cap)) - log_z)


def _state_values(h, f, cap=None):
    """ `f` is either a per-state array or a callable of the energy table.
    """
    if callable(f):
        values = f(h.energies(cap))
    else:
        values = f
    values = np.broadcast_to(np.asarray(values, dtype=float), (h.state_count,))
    if np.any(values < 0):
        raise ValidationError("f must be nonnegative", "f")
    return values


def exact_moments(h, beta, f, cap=None):
    """ Mean and second moment of f under the Gibbs distribution.
    """
    distribution = exact_gibbs_distribution(h, beta, cap)
    values = _state_values(h, f, cap)
    mean = float(np.dot(distribution, values))
    if mean == 0:
        raise DegenerateError("f has zero mean; relative variance undefined")
    return Moments(mean=mean,
                   second_moment=float(np.dot(distribution, values ** 2)))


def mean_energy(h, beta, cap=None):
    """ E[H] under mu_beta, i.e. -d/dbeta ln Z(beta).
    """
    log_w = _log_weights(h, beta, cap)
    levels = np.nonzero(h.level_counts(cap))[0]
    return float(np.dot(np.exp(log_w - logsumexp(log_w)), levels))


def midpoint(beta_i, beta_j):
    if math.isinf(beta_j):
        return INF
    return (beta_i + beta_j) / 2


def log_relative_variance_pair(h, beta_i, beta_j, cap=None):
    """ ln Z(beta_i) Z(beta_j) / Z(mid)^2, the relative variance of both
        V_i and W_i.
    """
    return (log_partition_function(h, beta_i, cap)
            + log_partition_function(h, beta_j, cap)
            - 2 * log_partition_function(h, midpoint(beta_i, beta_j), cap))


def relative_variance_pair(h, beta_i, beta_j, cap=None):
    return math.exp(log_relative_variance_pair(h, beta_i, beta_j, cap))


def relative_variance_product(h, beta_i, beta_j, cap=None):
    """ Z(2 beta_j - beta_i) Z(beta_i) / Z(beta_j)^2, the relative variance
        of the single-sample product estimator X_i.
    """
    far = INF if math.isinf(beta_j) else 2 * beta_j - beta_i
    return math.exp(log_partition_function(h, far, cap)
                    + log_partition_function(h, beta_i, cap)
                    - 2 * log_partition_function(h, beta_j, cap))


def _graph_edges(graph):
    graph = nx.convert_node_labels_to_integers(graph, ordering="sorted")
    return graph.number_of_nodes(), [tuple(e) for e in graph.edges()]


def grid_graph(rows, cols):
    return _graph_edges(nx.grid_2d_graph(rows, cols))


def complete_graph(order):
    return _graph_edges(nx.complete_graph(order))


def cycle_graph(order):
    return _graph_edges(nx.cycle_graph(order))


def path_graph(order):
    return _graph_edges(nx.path_graph(order))


MODEL_TYPES = ('ising', 'potts', 'lookup')


def load_model(document):
    """ Builds a Hamiltonian from its JSON description, given as a mapping
        or a file path:
        {"type": "ising"|"potts"|"lookup", "vertices", "edges", "k",
         "energies"}.
    """
    if isinstance(document, (str, os.PathLike)):
        document = load_document(document)
    if not isinstance(document, dict):
        raise ValidationError("model must be a mapping", "model")
    kind = document.get('type')
    if kind not in MODEL_TYPES:
        raise ValidationError(
            f"must be one of {', '.join(MODEL_TYPES)}", "model.type")
    try:
        if kind == 'lookup':
            return LookupHamiltonian(table=tuple(document['energies']))
        vertices = int(document['vertices'])
        edges = tuple(tuple(e) for e in document.get('edges', []))
        if kind == 'ising':
            return IsingModel(vertex_count=vertices, edges=edges)
        return PottsModel(vertex_count=vertices, edges=edges,
                          color_count=int(document.get('k', 3)))
    except KeyError as e:
        raise ValidationError("missing field", f"model.{e.args[0]}")
    except ValidationError as e:
        raise ValidationError(str(e).split(': ', 1)[-1],
                              f"model.{e.field}" if e.field else "model")
    except (TypeError, ValueError) as e:
        raise ValidationError(str(e), "model")


def model_to_dict(h):
    if isinstance(h, LookupHamiltonian):
        return {'type': 'lookup', 'energies': list(h.table)}
    document = {
        'type': 'potts' if isinstance(h, PottsModel) else 'ising',
        'vertices': h.vertex_count,
        'edges': [list(e) for e in h.edges],
    }
    if isinstance(h, PottsModel):
        document['k'] = h.color_count
    return document
