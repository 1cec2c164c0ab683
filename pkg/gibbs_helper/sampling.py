import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .models import exact_gibbs_distribution, log_partition_function
from .util import chunk_gen, scaled_energies

logger = logging.getLogger(__name__)

SAMPLER_MODES = ('exact', 'glauber')


@dataclass(frozen=True)
class SamplerConfig:
    mode: str = 'exact'
    mixing_sweeps: int = 10
    burn_in_sweeps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SAMPLER_MODES:
            raise ValidationError(
                f"must be one of {', '.join(SAMPLER_MODES)}", "sampler.mode")
        if self.mode == 'glauber' and self.mixing_sweeps < 1:
            raise ValidationError("must be >= 1", "sampler.mixing_sweeps")
        if self.burn_in_sweeps < 0:
            raise ValidationError("must be >= 0", "sampler.burn_in_sweeps")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("must be a 64-bit integer", "sampler.seed")

    def to_dict(self):
        return {'mode': self.mode, 'mixing_sweeps': self.mixing_sweeps,
                'burn_in_sweeps': self.burn_in_sweeps, 'seed': self.seed}


@dataclass
class ChainState:
    """ One Glauber chain. Owned by a single worker; `rng` is its private
        stream.
    """
    configuration: np.ndarray
    current_energy: int
    beta: float
    rng: np.random.Generator

    def check(self, h):
        recomputed = h.energy_of(self.configuration)
        assert recomputed == self.current_energy, (
            f"incremental energy {self.current_energy} drifted from "
            f"{recomputed}")


def new_chain(h, beta, rng):
    configuration = rng.integers(h.site_values, size=h.site_count)
    return ChainState(configuration=configuration,
                      current_energy=h.energy_of(configuration),
                      beta=beta, rng=rng)


def conditional_distribution(h, configuration, site, beta):
    """ Gibbs law of `site` given every other site.
    """
    local = h.local_energies(configuration, site)
    log_w = -scaled_energies(beta, local - local.min())
    return np.exp(log_w - logsumexp(log_w)), local


def glauber_step(state, h):
    """ Heat-bath update: pick a site uniformly and resample it from its
        exact conditional distribution.
    """
    site = int(state.rng.integers(h.site_count))
    probabilities, local = conditional_distribution(
        h, state.configuration, site, state.beta)
    cumulative = np.cumsum(probabilities)
    value = int(np.searchsorted(
        cumulative, state.rng.random() * cumulative[-1], side='right'))
    value = min(value, h.site_values - 1)
    old = int(state.configuration[site])
    state.current_energy += int(local[value] - local[old])
    state.configuration[site] = value
    return state


def sweep(state, h, count=1):
    for _ in range(count * h.site_count):
        glauber_step(state, h)
    return state


def glauber_kernel_matrix(h, beta, cap=256):
    """ Full one-step transition matrix of the heat-bath chain.
    """
    h.check_enumerable(cap)
    size = h.state_count
    kernel = np.zeros((size, size))
    for x in range(size):
        configuration = h.config_from_index(x)
        for site in range(h.site_count):
            probabilities, _ = conditional_distribution(
                h, configuration, site, beta)
            for value, p in enumerate(probabilities):
                moved = configuration.copy()
                moved[site] = value
                kernel[x, h.index_from_config(moved)] += p / h.site_count
    return kernel


class Sampler:
    """ Draws from mu_beta. Exact mode inverts the cumulative distribution
        of the enumerated state space; glauber mode keeps one chain per beta
        and advances it `mixing_sweeps` sweeps between reported samples.
    """

    def __init__(self, sampler_config=None, seed_sequence=None, cap=None):
        self.config = sampler_config or SamplerConfig()
        self.seed_sequence = seed_sequence or np.random.SeedSequence(
            self.config.seed)
        self.rng = np.random.default_rng(self.seed_sequence.spawn(1)[0])
        self.cap = cap
        self.samples_drawn = 0
        self._chains = {}

    @property
    def exact(self):
        return self.config.mode == 'exact'

    def _chain(self, h, beta):
        key = (id(h), beta)
        if key not in self._chains:
            rng = np.random.default_rng(self.seed_sequence.spawn(1)[0])
            state = new_chain(h, beta, rng)
            sweep(state, h, self.config.burn_in_sweeps)
            logger.debug("started chain %d at beta=%s", len(self._chains),
                         beta)
            self._chains[key] = state
        return self._chains[key]

    def _next_chain_sample(self, h, beta):
        state = sweep(self._chain(h, beta), h, self.config.mixing_sweeps)
        return state

    def draw_states(self, h, beta, size):
        """ `size` state indices.
        """
        self.samples_drawn += size
        if self.exact:
            cumulative = np.cumsum(exact_gibbs_distribution(h, beta, self.cap))
            draws = [np.searchsorted(
                cumulative, self.rng.random(batch) * cumulative[-1],
                side='right') for batch in chunk_gen(size)]
            states = np.concatenate(draws) if draws else np.zeros(0, int)
            return np.minimum(states, h.state_count - 1)
        return np.array([
            h.index_from_config(self._next_chain_sample(h, beta).configuration)
            for _ in range(size)])

    def draw_sample(self, h, beta):
        return int(self.draw_states(h, beta, 1)[0])

    def draw_energies(self, h, beta, size):
        if self.exact:
            return h.energies(self.cap)[self.draw_states(h, beta, size)]
        self.samples_drawn += size
        return np.array([self._next_chain_sample(h, beta).current_energy
                         for _ in range(size)], dtype=np.int64)

    def energy_histogram(self, h, beta, size):
        """ Counts of H(x) = 0..n over `size` draws. In exact mode the
            counts come from one multinomial draw over energy levels, which
            has the same law as `size` independent inverse-CDF draws.
        """
        if not self.exact:
            return np.bincount(self.draw_energies(h, beta, size),
                               minlength=h.max_energy + 1)
        self.samples_drawn += size
        counts = h.level_counts(self.cap)
        levels = np.arange(counts.size)
        with np.errstate(divide='ignore'):
            log_w = np.log(counts) - scaled_energies(beta, levels)
        probabilities = np.exp(log_w - log_partition_function(h, beta,
                                                              self.cap))
        probabilities = probabilities / probabilities.sum()
        return self.rng.multinomial(size, probabilities)


def empirical_distribution(states, state_count):
    return np.bincount(states, minlength=state_count) / len(states)


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
