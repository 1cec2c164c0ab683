import math

import numpy as np
import pytest
from scipy.stats import chisquare

from gibbs_helper.errors import ValidationError
from gibbs_helper.models import exact_gibbs_distribution, exact_moments
from gibbs_helper.sampling import (
    SamplerConfig, conditional_distribution, empirical_distribution,
    glauber_kernel_matrix, new_chain, sweep, total_variation)


def test_exact_draws_follow_gibbs(potts_triangle, make_sampler):
    sampler = make_sampler(seed=5)
    states = sampler.draw_states(potts_triangle, 0.7, 20000)
    expected = exact_gibbs_distribution(potts_triangle, 0.7) * states.size
    observed = np.bincount(states, minlength=potts_triangle.state_count)
    assert chisquare(observed, expected).pvalue > 1e-4
    assert sampler.samples_drawn == 20000


def test_energy_histogram_counts_every_draw(ising_grid, make_sampler):
    sampler = make_sampler(seed=2)
    histogram = sampler.energy_histogram(ising_grid, 1.0, 123456)
    assert histogram.sum() == 123456
    assert histogram.size == ising_grid.max_energy + 1
    # energies 1 and 11 do not occur on the 3x3 grid
    assert histogram[1] == histogram[11] == 0
    assert sampler.samples_drawn == 123456


def test_infinite_beta_draws_ground_states(single_edge, make_sampler):
    states = make_sampler(seed=1).draw_states(single_edge, np.inf, 200)
    assert set(states.tolist()) <= {0, 3}


def test_same_seed_same_draws(ising_grid, make_sampler):
    first = make_sampler(seed=9).draw_energies(ising_grid, 0.4, 500)
    second = make_sampler(seed=9).draw_energies(ising_grid, 0.4, 500)
    assert np.array_equal(first, second)


def test_glauber_kernel_is_stochastic_and_stationary(potts_triangle):
    kernel = glauber_kernel_matrix(potts_triangle, 0.7)
    pi = exact_gibbs_distribution(potts_triangle, 0.7)
    assert kernel.sum(axis=1) == pytest.approx(np.ones(kernel.shape[0]))
    assert pi @ kernel == pytest.approx(pi, abs=1e-12)


def test_glauber_kernel_is_reversible(single_edge):
    kernel = glauber_kernel_matrix(single_edge, 1.3)
    pi = exact_gibbs_distribution(single_edge, 1.3)
    flow = pi[:, None] * kernel
    assert flow == pytest.approx(flow.T, abs=1e-12)


def test_incremental_energy_stays_exact(ising_grid):
    state = new_chain(ising_grid, 0.9, np.random.default_rng(4))
    for _ in range(20):
        sweep(state, ising_grid)
        state.check(ising_grid)


def test_glauber_sampler_matches_gibbs(single_edge, make_sampler):
    sampler = make_sampler(seed=3, mode='glauber', mixing_sweeps=2,
                           burn_in_sweeps=20)
    states = sampler.draw_states(single_edge, 1.0, 20000)
    empirical = empirical_distribution(states, single_edge.state_count)
    assert total_variation(
        empirical, exact_gibbs_distribution(single_edge, 1.0)) < 0.04


def test_glauber_energies_use_the_chain(ising_grid, make_sampler):
    sampler = make_sampler(seed=3, mode='glauber', burn_in_sweeps=5)
    energies = sampler.draw_energies(ising_grid, 0.5, 30)
    assert energies.dtype == np.int64
    assert energies.min() >= 0 and energies.max() <= 12
    assert sampler.samples_drawn == 30


@pytest.mark.parametrize("overrides, field", [
    ({'mode': 'metropolis'}, "sampler.mode"),
    ({'mode': 'glauber', 'mixing_sweeps': 0}, "sampler.mixing_sweeps"),
    ({'burn_in_sweeps': -1}, "sampler.burn_in_sweeps"),
    ({'seed': -3}, "sampler.seed"),
])
def test_sampler_config_fields(overrides, field):
    with pytest.raises(ValidationError) as info:
        SamplerConfig(**overrides)
    assert info.value.field == field


def test_glauber_conditional(single_edge):
    for beta in (0.0, 0.5, 2.0):
        probabilities, _ = conditional_distribution(
            single_edge, np.array([0, 0]), 0, beta)
        assert probabilities[1] == pytest.approx(
            math.exp(-beta) / (1 + math.exp(-beta)))


def test_exact_draws_of_single_edge(single_edge, make_sampler):
    energies = make_sampler(seed=8).draw_energies(single_edge, 2.0, 10 ** 5)
    assert np.mean(energies == 0) == pytest.approx(
        1 / (1 + math.exp(-2)), abs=0.01)


def test_glauber_mean_energy_on_grid(ising_grid, make_sampler):
    sampler = make_sampler(seed=13, mode='glauber', mixing_sweeps=50)
    energies = sampler.draw_energies(ising_grid, 0.2, 400)
    moments = exact_moments(ising_grid, 0.2, lambda e: e.astype(float))
    spread = math.sqrt(moments.second_moment - moments.mean ** 2)
    assert abs(energies.mean() - moments.mean) <= 3 * spread / math.sqrt(400)
