import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gibbs_helper.errors import (
    ContractViolation, EnumerationInfeasible, JumpError, PipelineError,
    PreconditionError)
from gibbs_helper.models import (
    IsingModel, LookupHamiltonian, exact_partition_function, path_graph,
    relative_variance_pair)
from gibbs_helper.qsim import (
    AEBackend, DiagonalProjector, QSample, QSampleChain, QuantumConfig,
    ResourceLedger, amplitude_estimate_nondestructive, as_projector,
    error_bound, estimate_ratio_quantum, generate_schedule_quantum,
    jump_by_measurement, jump_failure_probability, jump_rounds, level_count,
    level_index, phase_estimation_law, phase_register, prepare_qsample,
    qsample_for, quantum_mean_bounded_second_moment, quantum_mean_relative,
    overlap_squared, reflect, relative_copy_count, repetitions,
    restoration_fidelity, restoration_success, simulate_jump,
    statevector_outcome_law)
from gibbs_helper.sampling import total_variation
from gibbs_helper.schedule import length_bound_balanced, verify_schedule
from gibbs_helper.util import INF

from conftest import GRID_Q


def test_qsample_is_a_unit_vector(ising_grid):
    psi = prepare_qsample(ising_grid, 0.7)
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1, abs=1e-12)
    assert psi.dimension == 512
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 0.0


def test_qsample_extremes(single_edge):
    uniform = prepare_qsample(single_edge, 0.0)
    assert uniform.amplitudes == pytest.approx(np.full(4, 0.5))
    ground = prepare_qsample(single_edge, INF)
    assert ground.amplitudes == pytest.approx(
        [math.sqrt(0.5), 0, 0, math.sqrt(0.5)])


def test_qsample_validation():
    with pytest.raises(ContractViolation):
        QSample(np.array([1.0, 1.0]))
    with pytest.raises(ContractViolation):
        QSample(np.array([-0.6, 0.8]))


def test_overlap_of_gibbs_states(ising_grid):
    a, b = prepare_qsample(ising_grid, 0.5), prepare_qsample(ising_grid, 1.5)
    assert overlap_squared(a, b) == pytest.approx(
        1 / relative_variance_pair(ising_grid, 0.5, 1.5), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0, max_value=5), st.integers(0, 2 ** 32))
def test_reflection(beta, seed):
    psi = prepare_qsample(LookupHamiltonian(table=(0, 1, 1, 2, 3, 0)), beta)
    vector = np.random.default_rng(seed).normal(size=psi.dimension)
    ledger = ResourceLedger()
    twice = reflect(reflect(vector, psi, ledger), psi, ledger)
    assert twice == pytest.approx(vector)
    assert reflect(psi.amplitudes, psi) == pytest.approx(psi.amplitudes)
    assert ledger.reflections_invoked == 2


def test_phase_estimation_law_at_zero():
    law = phase_estimation_law(0.0, 16)
    assert law[0] == 1.0
    assert law.sum() == 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.001, max_value=0.999),
       st.integers(min_value=2, max_value=300))
def test_phase_estimation_law_is_a_distribution(p, grid):
    law = phase_estimation_law(p, grid)
    assert law.min() >= 0
    assert law.sum() == pytest.approx(1)


def test_statevector_matches_analytic_law(single_edge):
    psi = prepare_qsample(single_edge, 1.0)
    projector = DiagonalProjector(np.array([True, False, False, False]))
    backend = AEBackend('statevector')
    grid = backend.grid_size(32)
    assert grid == 32
    simulated = statevector_outcome_law(psi, projector, grid, backend)
    analytic = phase_estimation_law(psi.probabilities[0], grid)
    assert simulated == pytest.approx(analytic, abs=1e-10)


def test_statevector_respects_cap(ising_grid):
    psi = prepare_qsample(ising_grid, 1.0)
    backend = AEBackend('statevector', phase_bits=10, simulation_cap=4096)
    with pytest.raises(EnumerationInfeasible):
        amplitude_estimate_nondestructive(psi, psi, 100, 0.1, backend)


@pytest.mark.parametrize("mode", ['analytic', 'statevector'])
def test_estimate_of_zero_amplitude(single_edge, mode):
    psi = prepare_qsample(single_edge, 1.0)
    p_hat, _ = amplitude_estimate_nondestructive(
        psi, np.zeros(4, dtype=bool), 16, 0.1, AEBackend(mode),
        np.random.default_rng(1))
    assert p_hat == 0.0


def test_estimate_meets_error_bound(single_edge):
    psi = prepare_qsample(single_edge, 1.0)
    projector = np.array([True, False, False, False])
    p = float(psi.probabilities[0])
    rng = np.random.default_rng(2)
    ledger = ResourceLedger()
    hits = 0
    for _ in range(200):
        p_hat, _ = amplitude_estimate_nondestructive(
            psi, projector, 64, 0.1, rng=rng, ledger=ledger)
        hits += abs(p_hat - p) <= error_bound(p, 64)
    assert hits >= 180
    assert ledger.reflections_invoked == 200 * repetitions(0.1) * 63
    assert ledger.qsample_copies_restored + \
        ledger.qsample_copies_reprepared == 200


def test_repetitions_are_odd():
    for eta in (0.5, 0.1, 0.01, 1e-6):
        assert repetitions(eta) % 2 == 1
    assert repetitions(1e-6) > repetitions(0.1)


def test_jump_failure_probability():
    assert jump_failure_probability(1 / 15, 3) == pytest.approx(0.6265,
                                                                abs=1e-4)
    assert jump_failure_probability(1.0, 0) == 0.0


def test_simulated_jump_follows_failure_law():
    rng = np.random.default_rng(3)
    failures = sum(not simulate_jump(1 / 15, 3, rng)[0]
                   for _ in range(5000))
    assert failures / 5000 == pytest.approx(0.6265, abs=0.03)


def test_jump_rounds():
    previous = 0
    for eta in (0.5, 0.1, 0.01, 0.001):
        rounds = jump_rounds(1 / 15, eta)
        assert jump_failure_probability(1 / 15, rounds) <= eta
        assert rounds >= previous
        previous = rounds
    assert jump_rounds(0.99, 0.05) == 0


def test_jump_charges_two_reflections_per_measurement(ising_grid):
    here, there = prepare_qsample(ising_grid, 1.0), \
        prepare_qsample(ising_grid, 1.1)
    ledger = ResourceLedger()
    landed = jump_by_measurement(here, there, 0.01,
                                 np.random.default_rng(4), ledger)
    assert landed is there
    assert ledger.jump_measurements >= 1
    assert ledger.reflections_invoked == 2 * ledger.jump_measurements


def test_chain_copies_walk_every_jump(ising_grid):
    ledger = ResourceLedger()
    chain = QSampleChain(ising_grid, 0.0, 0.01, np.random.default_rng(5),
                         ledger)
    chain.append(prepare_qsample(ising_grid, 0.5))
    chain.append(prepare_qsample(ising_grid, 1.0))
    chain.prepare_copies(0, 10)
    assert ledger.jump_measurements == 0
    chain.prepare_copies(2, 10)
    assert ledger.jump_measurements >= 20


def test_level_index():
    levels = level_index(np.array([0.0, 0.5, 1.0, 3.0, 4.0, 100.0]), 3)
    assert levels.tolist() == [0, 0, 1, 2, 3, 4]


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=0.01, max_value=1e4),
       st.floats(min_value=1e-4, max_value=0.99))
def test_level_count_covers_the_tail(B, epsilon):
    k = level_count(B, epsilon)
    assert B / 2 ** k <= epsilon / 2
    assert k >= math.ceil(math.log(2 * B / epsilon))


def test_relative_copy_count():
    assert relative_copy_count(15, 0.2) == 553


def test_relative_mean_consumes_its_copies(single_edge):
    dist = prepare_qsample(single_edge, 0.0)
    ledger = ResourceLedger()
    requested = []
    estimate = quantum_mean_relative(
        dist, np.ones(4), 15, 0.1, 0.2, rng=np.random.default_rng(6),
        ledger=ledger, copy_source=requested.append)
    assert ledger.qsample_copies_consumed == 553
    assert requested == [553]
    assert estimate == pytest.approx(1.0, abs=0.1)


def test_relative_mean_of_stage_variable(single_edge):
    dist = prepare_qsample(single_edge, 0.0)
    f = np.exp(-0.5 * single_edge.energies())
    estimate = quantum_mean_relative(dist, f, 15, 0.05, 0.1,
                                     rng=np.random.default_rng(7))
    exact = float(np.dot(dist.probabilities, f))
    assert estimate == pytest.approx(exact, rel=0.05)


def test_quantum_schedule_on_grid(ising_grid):
    ledger = ResourceLedger()
    schedule = generate_schedule_quantum(
        ising_grid, GRID_Q, 0.1, rng=np.random.default_rng(8), ledger=ledger)
    assert schedule.betas[0] == 0.0
    assert schedule.betas[-1] == pytest.approx(GRID_Q)
    assert schedule.length <= length_bound_balanced(GRID_Q, 12)
    assert verify_schedule(ising_grid, schedule, c2=15).passes
    assert schedule.reflections == ledger.reflections_invoked > 0


def test_quantum_schedules_over_many_seeds(ising_grid):
    valid = 0
    for seed in range(20):
        try:
            schedule = generate_schedule_quantum(
                ising_grid, GRID_Q, 0.1, rng=np.random.default_rng(seed))
        except PipelineError:
            continue
        assert schedule.length <= length_bound_balanced(GRID_Q, 12)
        valid += verify_schedule(ising_grid, schedule, c2=15).passes
    assert valid >= 18


def test_quantum_estimate_on_grid(ising_grid):
    report = estimate_ratio_quantum(ising_grid, 0.0, GRID_Q, 0.2, seed=3)
    exact = (exact_partition_function(ising_grid, GRID_Q)
             / exact_partition_function(ising_grid, 0.0))
    assert abs(report.q_hat - exact) <= 0.4 * exact
    assert report.samples_used == report.ledger['qsample_copies_consumed']
    assert len(report.stages) == report.schedule_length


def test_quantum_reflections_scale_with_inverse_epsilon(ising_grid):
    coarse = estimate_ratio_quantum(ising_grid, 0.0, GRID_Q, 0.2, seed=5)
    fine = estimate_ratio_quantum(ising_grid, 0.0, GRID_Q, 0.1, seed=5)
    assert coarse.schedule.betas == fine.schedule.betas

    def stage_reflections(report):
        return (report.ledger['reflections_invoked']
                - report.schedule.reflections)

    ratio = stage_reflections(fine) / stage_reflections(coarse)
    assert 1.6 <= ratio <= 2.6


def test_quantum_estimate_trivial_range(ising_grid):
    report = estimate_ratio_quantum(ising_grid, 2.0, 2.0, 0.2)
    assert report.q_hat == 1.0
    assert report.ledger['reflections_invoked'] == 0


def test_backend_fields():
    with pytest.raises(ValueError) as info:
        AEBackend('tensor-network')
    assert info.value.field == "ae_backend.mode"
    assert AEBackend('statevector', phase_bits=5).grid_size(100) == 32
    assert AEBackend().grid_size(99.5) == 100


def test_rotated_qsample_marks_the_mean(single_edge):
    dist = prepare_qsample(single_edge, 1.0)
    f = np.array([0.25, 1.0, 0.0, 0.5])
    rotated = qsample_for(dist, f)
    assert rotated.dimension == 8
    assert np.sum(rotated.probabilities[1::2]) == pytest.approx(
        float(np.dot(dist.probabilities, f)), abs=1e-12)
    with pytest.raises(ContractViolation):
        qsample_for(dist, np.array([0.0, 2.0, 0.0, 0.0]))


@pytest.mark.parametrize("p", [0.01, 0.1, 0.25, 0.5, 0.9])
@pytest.mark.parametrize("t", [16, 64, 256])
def test_estimate_error_bound_across_amplitudes(p, t):
    psi = QSample(np.array([math.sqrt(p), math.sqrt(1 - p)]))
    marked = np.array([True, False])
    rng = np.random.default_rng(t)
    misses = 0
    for _ in range(500):
        p_hat, _ = amplitude_estimate_nondestructive(psi, marked, t, 0.05,
                                                     rng=rng)
        misses += abs(p_hat - p) > error_bound(p, t)
    assert misses <= 37


def test_statevector_histogram_matches_analytic(single_edge):
    psi = prepare_qsample(single_edge, 0.0)
    target = prepare_qsample(single_edge, INF)
    backend = AEBackend('statevector')
    grid = backend.grid_size(32)
    analytic = phase_estimation_law(overlap_squared(psi, target), grid)
    simulated = statevector_outcome_law(psi, as_projector(target, 4), grid,
                                        backend)
    rng = np.random.default_rng(9)
    histograms = [
        np.bincount(rng.choice(grid, size=2000, p=law), minlength=grid) / 2000
        for law in (analytic, simulated)]
    assert total_variation(*histograms) <= 0.05


def test_restoration_follows_post_measurement_overlap(single_edge):
    psi = prepare_qsample(single_edge, 1.0)
    marked = np.array([True, False, False, False])
    backend = AEBackend('statevector')
    grid, runs = backend.grid_size(8), repetitions(0.1)
    register = phase_register(psi, DiagonalProjector(marked), grid, backend)
    law = np.sum(np.abs(register) ** 2, axis=1)
    law = law / law.sum()
    success = restoration_success(restoration_fidelity(register, psi),
                                  0.1 / runs)
    expected = float(law @ success) ** runs

    rng = np.random.default_rng(10)
    ledger = ResourceLedger()
    restored = sum(amplitude_estimate_nondestructive(
        psi, marked, 8, 0.1, backend, rng, ledger)[1] for _ in range(1000))
    assert restored / 1000 == pytest.approx(expected, abs=0.05)
    assert ledger.qsample_copies_restored == restored
    assert ledger.qsample_copies_reprepared == 1000 - restored
    assert ledger.reflections_invoked == \
        1000 * runs * (grid - 1) + 2 * ledger.jump_measurements


def test_restoration_of_an_eigenstate_always_succeeds(single_edge):
    psi = prepare_qsample(single_edge, 1.0)
    backend = AEBackend('statevector')
    register = phase_register(psi, DiagonalProjector(np.zeros(4, bool)), 16,
                              backend)
    weights = np.sum(np.abs(register) ** 2, axis=1)
    fidelity = restoration_fidelity(register, psi)
    assert fidelity[weights > 1e-12] == pytest.approx(1.0)
    rng = np.random.default_rng(11)
    assert all(amplitude_estimate_nondestructive(
        psi, np.zeros(4, bool), 16, 0.1, backend, rng)[1]
        for _ in range(50))


def test_jump_refuses_overlap_below_plan(ising_grid):
    here, there = prepare_qsample(ising_grid, 0.0), \
        prepare_qsample(ising_grid, INF)
    assert overlap_squared(here, there) < 1 / 15
    ledger = ResourceLedger()
    with pytest.raises(PreconditionError) as info:
        jump_by_measurement(here, there, 0.01, np.random.default_rng(12),
                            ledger)
    assert info.value.field == "min_overlap"
    assert ledger.jump_measurements == 0


def test_quantum_schedule_reports_refused_jump(ising_grid):
    with pytest.raises(JumpError):
        generate_schedule_quantum(
            ising_grid, GRID_Q, 0.1, rng=np.random.default_rng(13),
            quantum_config=QuantumConfig(jump_min_overlap=0.99))


def test_bounded_second_moment_of_zero(single_edge):
    dist = prepare_qsample(single_edge, 0.0)
    assert quantum_mean_bounded_second_moment(
        dist, np.zeros(4), 2, 0.05, 0.1, rng=np.random.default_rng(14)) == 0.0


def test_bounded_second_moment_estimate(single_edge):
    dist = prepare_qsample(single_edge, 0.0)
    f = np.exp(-0.5 * single_edge.energies())
    exact = (2 + 2 * math.exp(-0.5)) / 4
    rng = np.random.default_rng(15)
    hits = sum(abs(quantum_mean_bounded_second_moment(
        dist, f, 2, 0.05, 0.1, rng=rng) - exact) <= 0.05
        for _ in range(100))
    assert hits >= 90


def test_overlap_decreases_as_beta_grows(ising_grid):
    base = prepare_qsample(ising_grid, 0.5)
    overlaps = [overlap_squared(base, prepare_qsample(ising_grid, beta))
                for beta in np.linspace(0.5, 6, 50)]
    assert overlaps[0] == pytest.approx(1.0)
    assert all(later <= earlier + 1e-12
               for earlier, later in zip(overlaps, overlaps[1:]))


def test_schedule_reflections_scale_with_schedule_bound():
    bounds, reflections = [], []
    for order in (8, 10, 12, 14, 16, 18, 20):
        vertices, edges = path_graph(order)
        model = IsingModel(vertex_count=vertices, edges=tuple(edges))
        q, n = model.log_state_count, model.max_energy
        schedule = generate_schedule_quantum(
            model, q, 0.1, rng=np.random.default_rng(order))
        bounds.append(math.sqrt(q * math.log(n))
                      * (math.log(q) + math.log(n)))
        reflections.append(schedule.reflections)
    slope = np.polyfit(np.log(bounds), np.log(reflections), 1)[0]
    assert 0.8 <= slope <= 1.2
