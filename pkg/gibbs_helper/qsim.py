import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import config
from .errors import (
    ContractViolation, DegenerateError, EnumerationInfeasible, JumpError,
    PipelineError, PreconditionError, ScheduleError, StageError,
    ValidationError)
from .estimator import EstimateReport
from .models import exact_gibbs_distribution
from .schedule import (
    EXTENSION, OVERLAP_CAPPED, TARGET_REACHED, CoolingSchedule, MoveRecord,
    binary_search, check_gates, length_bound_balanced)
from .util import INF, beta_to_json, child_rng, scaled_energies

logger = logging.getLogger(__name__)

AE_MODES = ('analytic', 'statevector')

QUANTUM_C2 = 15.0
QUANTUM_VARIANCE_BOUND = 15.0
OVERLAP_THRESHOLD = 0.075
OVERLAP_ERROR = 0.005
JUMP_MIN_OVERLAP = 1 / 15
MEDIAN_SUCCESS = 8 / math.pi ** 2
COPY_ATTEMPTS = 1000


@dataclass(frozen=True)
class QuantumConfig:
    delta: float = 0.1
    variance_bound: float = QUANTUM_VARIANCE_BOUND
    overlap_threshold: float = OVERLAP_THRESHOLD
    overlap_error: float = OVERLAP_ERROR
    jump_min_overlap: float = JUMP_MIN_OVERLAP

    def __post_init__(self):
        for name in ('delta', 'overlap_threshold', 'overlap_error',
                     'jump_min_overlap'):
            if not 0 < getattr(self, name) < 1:
                raise ValidationError("must be in (0, 1)", f"quantum.{name}")
        if self.variance_bound <= 1:
            raise ValidationError("must be > 1", "quantum.variance_bound")

    def to_dict(self):
        return {'delta': self.delta, 'variance_bound': self.variance_bound,
                'overlap_threshold': self.overlap_threshold,
                'overlap_error': self.overlap_error,
                'jump_min_overlap': self.jump_min_overlap}


@dataclass(frozen=True)
class AEBackend:
    """ How amplitude estimation is simulated. `analytic` samples the exact
        phase-estimation outcome law on M = ceil(t) points; `statevector`
        runs the Grover iterates on a 2^phase_bits point register.
    """
    mode: str = 'analytic'
    phase_bits: Optional[int] = None
    simulation_cap: Optional[int] = None

    def __post_init__(self):
        if self.mode not in AE_MODES:
            raise ValidationError(
                f"must be one of {', '.join(AE_MODES)}", "ae_backend.mode")
        if self.phase_bits is not None and self.phase_bits < 1:
            raise ValidationError("must be >= 1", "ae_backend.phase_bits")

    @property
    def statevector(self):
        return self.mode == 'statevector'

    @property
    def cap(self):
        if self.simulation_cap is not None:
            return self.simulation_cap
        return int(config['SIMULATION_CAP'])

    def grid_size(self, t):
        if not self.statevector:
            return math.ceil(t)
        if self.phase_bits is not None:
            return 2 ** self.phase_bits
        return 2 ** max(1, math.ceil(math.log2(t)))

    def check_dimension(self, dimension, grid):
        if dimension * grid > self.cap:
            raise EnumerationInfeasible(
                f"statevector needs {dimension} x {grid} amplitudes, cap is "
                f"{self.cap}")

    def to_dict(self):
        return {'mode': self.mode, 'phase_bits': self.phase_bits}


@dataclass
class ResourceLedger:
    """ Resource counters of one run. Re-preparations after a failed
        restoration are counted apart from the copies an algorithm asks for.
    """
    reflections_invoked: int = 0
    qsample_copies_consumed: int = 0
    qsample_copies_restored: int = 0
    qsample_copies_reprepared: int = 0
    jump_measurements: int = 0

    def _add(self, name, count):
        if count < 0:
            raise ContractViolation(f"negative charge to {name}")
        setattr(self, name, getattr(self, name) + int(count))

    def charge_reflections(self, count=1):
        self._add('reflections_invoked', count)

    def consume_copies(self, count=1):
        self._add('qsample_copies_consumed', count)

    def restore_copy(self):
        self._add('qsample_copies_restored', 1)

    def reprepare_copy(self):
        self._add('qsample_copies_reprepared', 1)

    def record_measurements(self, count):
        self._add('jump_measurements', count)

    def to_dict(self):
        return {
            'reflections_invoked': self.reflections_invoked,
            'qsample_copies_consumed': self.qsample_copies_consumed,
            'qsample_copies_restored': self.qsample_copies_restored,
            'qsample_copies_reprepared': self.qsample_copies_reprepared,
            'jump_measurements': self.jump_measurements,
        }


@dataclass(frozen=True, eq=False)
class QSample:
    """ Real unit vector with nonnegative entries sqrt(D(x)).
    """
    amplitudes: np.ndarray
    beta: Optional[float] = None

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=float)
        if amplitudes.ndim != 1 or amplitudes.size == 0:
            raise ContractViolation("amplitudes must be a nonempty vector")
        if np.any(amplitudes < 0):
            raise ContractViolation("amplitudes must be nonnegative")
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1) > 1e-12:
            raise ContractViolation(f"amplitudes have norm {norm!r}")
        amplitudes.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amplitudes)

    @property
    def dimension(self):
        return self.amplitudes.size

    @property
    def probabilities(self):
        return self.amplitudes ** 2


def prepare_qsample(h, beta, cap=None):
    distribution = exact_gibbs_distribution(h, beta, cap)
    amplitudes = np.sqrt(distribution)
    return QSample(amplitudes / np.linalg.norm(amplitudes), beta)


def _vector(state):
    return state.amplitudes if isinstance(state, QSample) else \
        np.asarray(state)


def _check_dimensions(left, right):
    if left.shape != right.shape:
        raise ValidationError(
            f"dimension mismatch: {left.size} vs {right.size}")


def overlap_squared(a, b):
    """ |<a|b>|^2; for two Gibbs qsamples this is Z(mid)^2 / (Z(a) Z(b)).
    """
    left, right = _vector(a), _vector(b)
    _check_dimensions(left, right)
    return float(min(1.0, abs(np.vdot(left, right)) ** 2))


def reflect(state, about, ledger=None):
    """ (2 |about><about| - I) state.
    """
    state = np.asarray(state)
    axis = _vector(about)
    _check_dimensions(state, axis)
    if ledger is not None:
        ledger.charge_reflections(1)
    return 2 * np.dot(axis, state) * axis - state


def qsample_for(dist, f):
    """ sum_x sqrt(D(x)) |x> (sqrt(1 - f(x)) |0> + sqrt(f(x)) |1>), stored
        with index 2x + bit. Needs 0 <= f <= 1.
    """
    values = np.asarray(f, dtype=float)
    _check_dimensions(dist.amplitudes, values)
    if np.any(values < 0) or np.any(values > 1):
        raise ContractViolation("rotated function must map into [0, 1]")
    amplitudes = np.empty(2 * dist.dimension)
    amplitudes[0::2] = dist.amplitudes * np.sqrt(1 - values)
    amplitudes[1::2] = dist.amplitudes * np.sqrt(values)
    return QSample(amplitudes / np.linalg.norm(amplitudes), dist.beta)


def marked_bit_mask(dimension):
    """ Projector I (x) |1><1| on the rotated space of `dimension` states.
    """
    return DiagonalProjector(np.tile([False, True], dimension))


@dataclass(frozen=True, eq=False)
class DiagonalProjector:
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'mask', np.asarray(self.mask, dtype=bool))

    @property
    def dimension(self):
        return self.mask.size

    def probability(self, vector):
        return float(np.sum(np.abs(vector[self.mask]) ** 2))

    def apply(self, vector):
        out = np.zeros_like(vector)
        out[self.mask] = vector[self.mask]
        return out


@dataclass(frozen=True, eq=False)
class RankOneProjector:
    target: np.ndarray

    @property
    def dimension(self):
        return self.target.size

    def probability(self, vector):
        return float(abs(np.vdot(self.target, vector)) ** 2)

    def apply(self, vector):
        return self.target * np.dot(self.target, vector)


def as_projector(spec, dimension):
    """ A QSample means |v><v|, a boolean vector a diagonal projector.
    """
    if isinstance(spec, (DiagonalProjector, RankOneProjector)):
        projector = spec
    elif isinstance(spec, QSample):
        projector = RankOneProjector(spec.amplitudes)
    else:
        mask = np.asarray(spec)
        if mask.dtype != bool:
            raise ValidationError(
                "projector must be a QSample or a boolean mask", "projector")
        projector = DiagonalProjector(mask)
    if projector.dimension != dimension:
        raise ValidationError(
            f"projector acts on {projector.dimension} states, state has "
            f"{dimension}", "projector")
    return projector


def grover_iterate(vector, psi, projector):
    """ R_psi (I - 2P): rotation by 2 arcsin(sqrt(p)) in span{P psi,
        (I - P) psi}.
    """
    return reflect(vector - 2 * projector.apply(vector), psi)


def _fejer(delta, grid):
    denominator = np.sin(np.pi * delta)
    law = np.ones_like(delta)
    away = np.abs(denominator) > 1e-12
    law[away] = (np.sin(grid * np.pi * delta[away]) ** 2
                 / (grid ** 2 * denominator[away] ** 2))
    return law


def phase_estimation_law(p, grid):
    """ Probability of each outcome y = 0..M-1 of phase estimation on the
        Grover iterate for amplitude p; outcome y reads p_hat =
        sin^2(pi y / M).
    """
    if not -1e-12 <= p <= 1 + 1e-12:
        raise PreconditionError(f"p = {p} is not a probability")
    p = min(1.0, max(0.0, p))
    if p == 0:
        law = np.zeros(grid)
        law[0] = 1.0
        return law
    omega = math.asin(math.sqrt(p)) / math.pi
    points = np.arange(grid) / grid
    law = 0.5 * (_fejer(points - omega, grid) + _fejer(points + omega, grid))
    return law / law.sum()


def phase_register(psi, projector, grid, backend):
    """ Row y is the unnormalised system state left behind when the phase
        register of M^-1/2 sum_j |j> Q^j |psi> reads y after the inverse
        Fourier transform.
    """
    backend.check_dimension(psi.dimension, grid)
    iterates = np.empty((grid, psi.dimension))
    vector = np.array(psi.amplitudes)
    for j in range(grid):
        iterates[j] = vector
        vector = grover_iterate(vector, psi, projector)
    return np.fft.fft(iterates, axis=0) / grid


def statevector_outcome_law(psi, projector, grid, backend):
    """ Same law as phase_estimation_law, read off the explicit state.
    """
    register = phase_register(psi, projector, grid, backend)
    law = np.sum(np.abs(register) ** 2, axis=1)
    return law / law.sum()


def restoration_fidelity(register, psi):
    """ |<psi|v_y>|^2 for each normalised post-measurement state v_y; 0 for
        outcomes that cannot occur.
    """
    weights = np.sum(np.abs(register) ** 2, axis=1)
    overlaps = np.abs(register @ psi.amplitudes) ** 2
    fidelity = np.divide(overlaps, weights, out=np.zeros_like(weights),
                         where=weights > 1e-300)
    return np.clip(fidelity, 0.0, 1.0)


def restoration_rounds(fidelity, eta):
    """ Round budget for measuring a post-measurement state back onto psi,
        planned from max(fidelity, JUMP_MIN_OVERLAP).
    """
    return jump_rounds(max(float(fidelity), JUMP_MIN_OVERLAP), eta)


def restoration_success(fidelity, eta):
    """ Per-outcome probability that restoration with restoration_rounds
        brings the register back to psi.
    """
    return np.array([
        0.0 if f <= 0 else
        1 - jump_failure_probability(f, restoration_rounds(f, eta))
        for f in np.asarray(fidelity, dtype=float)])


def repetitions(eta):
    """ Odd number of runs whose median fails with probability <= eta when
        each run succeeds with probability 8 / pi^2.
    """
    runs = math.ceil(math.log(1 / eta) / (2 * (MEDIAN_SUCCESS - 0.5) ** 2))
    runs = max(1, runs)
    return runs if runs % 2 else runs + 1


def t_for_additive_error(epsilon):
    """ Smallest t with pi / t + pi^2 / t^2 <= epsilon, the worst case
        (p = 1/2) of the error bound.
    """
    return math.pi / ((math.sqrt(1 + 4 * epsilon) - 1) / 2)


def error_bound(p, t):
    return 2 * math.pi * math.sqrt(p * (1 - p)) / t + math.pi ** 2 / t ** 2


def amplitude_estimate_nondestructive(psi, projector_spec, t, eta,
                                      backend=None, rng=None, ledger=None):
    """ Estimate of p = <psi|P|psi> within 2 pi sqrt(p(1-p))/t + pi^2/t^2
        with probability >= 1 - eta, as the median of repetitions(eta)
        phase-estimation runs of M - 1 Grover iterates each.

        Returns (p_hat, restored). Restoration is Bernoulli(1 - eta) in the
        analytic backend. The statevector backend keeps the post-measurement
        state of every run and measures it back onto psi by alternating
        projections, each run with failure budget eta / runs. A failed
        restoration is charged as a re-prepared copy.
    """
    if t < 1:
        raise PreconditionError("t must be >= 1")
    if not 0 < eta < 1:
        raise PreconditionError("eta must be in (0, 1)")
    backend = backend or AEBackend()
    rng = rng if rng is not None else np.random.default_rng()
    ledger = ledger if ledger is not None else ResourceLedger()
    projector = as_projector(projector_spec, psi.dimension)
    grid = backend.grid_size(t)
    runs = repetitions(eta)
    if backend.statevector:
        register = phase_register(psi, projector, grid, backend)
        law = np.sum(np.abs(register) ** 2, axis=1)
        law = law / law.sum()
    else:
        law = phase_estimation_law(projector.probability(psi.amplitudes),
                                   grid)
    outcomes = rng.choice(grid, size=runs, p=law)
    p_hat = float(np.median(np.sin(np.pi * outcomes / grid) ** 2))
    ledger.charge_reflections(runs * (grid - 1))
    if backend.statevector:
        fidelity = restoration_fidelity(register, psi)
        restored = True
        for y in outcomes:
            if fidelity[y] <= 0:
                restored = False
                continue
            back, measurements = simulate_jump(
                float(fidelity[y]),
                restoration_rounds(fidelity[y], eta / runs), rng)
            ledger.record_measurements(measurements)
            ledger.charge_reflections(2 * measurements)
            restored = restored and back
    else:
        restored = bool(rng.random() < 1 - eta)
    if restored:
        ledger.restore_copy()
    else:
        ledger.reprepare_copy()
        logger.debug("restoration failed after estimate %.6f", p_hat)
    return p_hat, restored


def jump_failure_probability(a, k):
    """ (1 - a)(a^2 + (1 - a)^2)^k after 2k + 1 measurements.
    """
    return (1 - a) * (a * a + (1 - a) ** 2) ** k


def jump_rounds(a, eta):
    """ Smallest k with jump_failure_probability(a, k) <= eta.
    """
    if not 0 < a <= 1:
        raise PreconditionError(f"overlap {a} must be in (0, 1]")
    if 1 - a <= eta:
        return 0
    ratio = a * a + (1 - a) ** 2
    return max(0, math.ceil(math.log(eta / (1 - a)) / math.log(ratio)))


def simulate_jump(a, rounds, rng):
    """ Alternating {P_target}, {P_current} measurements in the plane of
        the two states. Returns (success, measurements).
    """
    if rng.random() < a:
        return True, 1
    measurements = 1
    for _ in range(rounds):
        # from target-perp: current w.p. 1 - a, else current-perp
        on_current = rng.random() < 1 - a
        measurements += 2
        if rng.random() < (a if on_current else 1 - a):
            return True, measurements
    return False, measurements


def jump_by_measurement(current, target, eta, rng=None, ledger=None,
                        min_overlap=JUMP_MIN_OVERLAP, rounds=None):
    """ Prepares `target` from `current`. The round budget is planned from
        the guaranteed overlap `min_overlap`, so an overlap below it is
        refused; every measurement costs two reflections.
    """
    rng = rng if rng is not None else np.random.default_rng()
    a = overlap_squared(current, target)
    if a < min_overlap:
        raise PreconditionError(
            f"overlap {a:.4f} is below the planned {min_overlap:.4f}",
            field="min_overlap")
    if rounds is None:
        rounds = jump_rounds(min_overlap, eta)
    success, measurements = simulate_jump(a, rounds, rng)
    if ledger is not None:
        ledger.record_measurements(measurements)
        ledger.charge_reflections(2 * measurements)
    if not success:
        raise JumpError(
            f"jump to beta={target.beta} failed after {measurements} "
            f"measurements (overlap {a:.4f})")
    return target


class QSampleChain:
    """ Qsamples along a growing schedule. Copies of the state at index i
        are made at beta_0 and walked there by successive jumps; failed
        walks restart from beta_0.
    """

    def __init__(self, model, beta, jump_eta, rng, ledger, cap=None,
                 min_overlap=JUMP_MIN_OVERLAP):
        self.model = model
        self.cap = cap
        self.rng = rng
        self.ledger = ledger
        self.min_overlap = min_overlap
        self.rounds = jump_rounds(min_overlap, jump_eta)
        self.states = [prepare_qsample(model, beta, cap)]
        self.overlaps = []

    def __len__(self):
        return len(self.states)

    def __getitem__(self, index):
        return self.states[index]

    def append(self, state):
        self.overlaps.append(overlap_squared(self.states[-1], state))
        self.states.append(state)

    def prepare_copies(self, index, count=1):
        for _ in range(count):
            self._walk(index)

    def _walk(self, index):
        for _ in range(COPY_ATTEMPTS):
            for a in self.overlaps[:index]:
                success, measurements = simulate_jump(a, self.rounds,
                                                      self.rng)
                self.ledger.record_measurements(measurements)
                self.ledger.charge_reflections(2 * measurements)
                if not success:
                    break
            else:
                return
        raise JumpError(f"could not prepare a copy of stage {index}")


def level_count(B, epsilon):
    """ k = ceil(ln(2B / epsilon)), raised until B / 2^k <= epsilon / 2.
    """
    k = max(0, math.ceil(math.log(2 * B / epsilon)))
    while B / 2 ** k > epsilon / 2:
        k += 1
    return k


def mean_estimation_t(B, epsilon):
    spread = math.sqrt(max(0.0, math.log(2 * B / epsilon)))
    return max(4 * math.pi * math.sqrt(B) / epsilon,
               8 * math.pi * (math.sqrt(B) * spread + 1) / epsilon)


def level_index(values, k):
    """ 0 where f < 1, l where 2^(l-1) <= f < 2^l, k + 1 where f >= 2^k.
    """
    _, exponents = np.frexp(values)
    levels = np.where(values < 1, 0, exponents)
    return np.minimum(levels, k + 1)


def _function_values(dist, f):
    values = np.asarray(f, dtype=float)
    _check_dimensions(dist.amplitudes, values)
    if np.any(np.isnan(values)) or np.any(values < 0):
        raise ValidationError("f must be nonnegative", "f")
    # values off the support never contribute
    return np.where(dist.probabilities > 0, values, 0.0)


def quantum_mean_bounded_second_moment(dist, f, B, epsilon, eta,
                                       backend=None, rng=None, ledger=None):
    """ |mu - mu_hat| <= epsilon with probability >= 1 - eta, when
        E[f^2] <= B. Each dyadic level of f is estimated on its own rotated
        qsample; the tail f >= 2^k is dropped.
    """
    if B <= 0:
        raise PreconditionError("B must be positive")
    if not (0 < epsilon < 1 and 0 < eta < 1):
        raise PreconditionError("need epsilon, eta in (0, 1)")
    values = _function_values(dist, f)
    rng = rng if rng is not None else np.random.default_rng()
    k = level_count(B, epsilon)
    t = mean_estimation_t(B, epsilon)
    levels = level_index(values, k)
    good = marked_bit_mask(dist.dimension)
    estimate = 0.0
    for level in range(k + 1):
        scaled = np.where(levels == level, values / 2 ** level, 0.0)
        p_hat, _ = amplitude_estimate_nondestructive(
            qsample_for(dist, scaled), good, t, eta / (k + 1), backend, rng,
            ledger)
        estimate += 2 ** level * p_hat
    return estimate


def rough_mean(dist, values, copies, batches, rng):
    """ Median of `batches` classical batch means over `copies` measured
        qsamples.
    """
    sizes = np.full(batches, copies // batches)
    sizes[:copies % batches] += 1
    means = []
    for size in sizes:
        counts = rng.multinomial(int(size), dist.probabilities
                                 / dist.probabilities.sum())
        means.append(float(np.dot(counts, values)) / size)
    return float(np.median(means))


def relative_copy_count(B, eta):
    """ floor(16 B ln(2/eta)) measured copies plus the one handed to the
        non-destructive stage.
    """
    return math.floor(16 * B * math.log(2 / eta)) + 1


def quantum_mean_relative(dist, f, B, epsilon, eta, backend=None, rng=None,
                          ledger=None, copy_source=None):
    """ epsilon-relative estimate of E[f] under dist with probability
        >= 1 - eta, given relative variance <= B. `copy_source(count)` is
        called once with the number of copies used.
    """
    if B <= 0:
        raise PreconditionError("B must be positive")
    if not (0 < epsilon < 1 and 0 < eta < 1):
        raise PreconditionError("need epsilon, eta in (0, 1)")
    values = _function_values(dist, f)
    rng = rng if rng is not None else np.random.default_rng()
    ledger = ledger if ledger is not None else ResourceLedger()
    measured = relative_copy_count(B, eta) - 1
    batches = max(1, math.floor(math.log(2 / eta)))
    rough = rough_mean(dist, values, measured, batches, rng)
    ledger.consume_copies(measured + 1)
    if copy_source is not None:
        copy_source(measured + 1)
    if rough == 0:
        raise DegenerateError("every measured f value was zero")
    rescaled = quantum_mean_bounded_second_moment(
        dist, values / rough, 4 * B, epsilon / 2, eta / 2, backend, rng,
        ledger)
    return rough * rescaled


def _overlap_eta(delta, q, n, beta_max):
    spread = max(1.0, math.log(max(beta_max, 1e-300)) + math.log(n))
    return delta / max(1.0, 4 * math.sqrt(q * math.log(n)) * spread)


def generate_schedule_quantum(model, beta_max, delta, beta_min=0.0,
                              backend=None, rng=None, ledger=None,
                              quantum_config=None, cap=None, seed=None):
    """ Schedule with every consecutive overlap >= 1/15, i.e.
        15-slowly-varying, from binary searches on estimated overlaps with
        the current qsample; the qsample follows the schedule by jumps.
    """
    settings = quantum_config or QuantumConfig()
    if beta_min > beta_max:
        raise PreconditionError("beta_min must not exceed beta_max")
    if beta_min == beta_max:
        return CoolingSchedule((beta_max,), c2=QUANTUM_C2, seed=seed)
    n, q = check_gates(model)
    target = min(beta_max, q)
    if beta_min >= target:
        return CoolingSchedule(
            (beta_min, beta_max), (MoveRecord(EXTENSION, beta_min, beta_max),),
            c2=QUANTUM_C2, seed=seed)

    rng = rng if rng is not None else child_rng(seed or 0, 0)
    ledger = ledger if ledger is not None else ResourceLedger()
    start_reflections = ledger.reflections_invoked
    max_length = length_bound_balanced(q, n)
    eta = _overlap_eta(delta, q, n, target)
    jump_eta = delta / 2 / max(1.0, max_length)
    t = t_for_additive_error(settings.overlap_error)
    alpha = 1 / (2 * n)
    chain = QSampleChain(model, beta_min, jump_eta, rng, ledger, cap,
                         settings.jump_min_overlap)
    cache = {}

    def qsample(beta):
        if beta not in cache:
            cache[beta] = prepare_qsample(model, beta, cap)
        return cache[beta]

    betas = [beta_min]
    moves = []
    stalls = 0
    while betas[-1] < target:
        beta_k = betas[-1]
        psi = chain[-1]

        def overlap_at_least(x, psi=psi):
            p_hat, restored = amplitude_estimate_nondestructive(
                psi, qsample(x), t, eta, backend, rng, ledger)
            if not restored:
                chain.prepare_copies(len(chain) - 1)
            return p_hat >= settings.overlap_threshold

        beta_star = binary_search(overlap_at_least, beta_k, target, alpha,
                                  start_known=True)
        if beta_star <= beta_k:
            stalls += 1
            logger.info("no progress from beta=%.6g", beta_k)
            if stalls > 3:
                raise ScheduleError(f"stuck at beta={beta_k}",
                                    move_log=[m.to_dict() for m in moves])
            continue
        tag = TARGET_REACHED if beta_star == target else OVERLAP_CAPPED
        logger.debug("move %s: %.6g -> %.6g", tag, beta_k, beta_star)
        try:
            chain.append(jump_by_measurement(
                psi, qsample(beta_star), jump_eta, rng, ledger,
                settings.jump_min_overlap, chain.rounds))
        except PreconditionError as error:
            raise JumpError(f"move to beta={beta_star}: {error}") from error
        moves.append(MoveRecord(tag, beta_k, beta_star))
        betas.append(beta_star)
        if len(betas) - 1 > max_length:
            raise ScheduleError(
                f"schedule length {len(betas) - 1} exceeds "
                f"sqrt(q ln n) = {max_length:.3f}",
                move_log=[m.to_dict() for m in moves])

    if beta_max > target:
        moves.append(MoveRecord(EXTENSION, target, beta_max))
        betas.append(beta_max)
    return CoolingSchedule(
        tuple(betas), tuple(moves), c2=QUANTUM_C2, seed=seed,
        reflections=ledger.reflections_invoked - start_reflections)


@dataclass(frozen=True)
class QuantumStage:
    beta: float
    beta_next: float
    mean_v: float
    mean_w: float

    def to_dict(self):
        return {'beta': beta_to_json(self.beta),
                'beta_next': beta_to_json(self.beta_next),
                'mean_v': self.mean_v, 'mean_w': self.mean_w}


def _stage_functions(model, beta, beta_next, cap):
    gap = INF if math.isinf(beta_next) else (beta_next - beta) / 2
    energies = model.energies(cap)
    with np.errstate(over='ignore'):
        return (np.exp(-scaled_energies(gap, energies)),
                np.exp(scaled_energies(gap, energies)))


def estimate_ratio_quantum(model, beta_min, beta_max, epsilon, backend=None,
                           seed=0, quantum_config=None, cap=None):
    """ Z(beta_max) / Z(beta_min) as prod E[V_i] / prod E[W_i], each stage
        mean from quantum_mean_relative with error epsilon / (2 l) and
        failure 1 / (20 l). The schedule draws from its own seed stream, so
        it does not depend on epsilon.
    """
    if not 0 < epsilon < 1:
        raise ValidationError("must be in (0, 1)", "epsilon")
    settings = quantum_config or QuantumConfig()
    ledger = ResourceLedger()
    if beta_min == beta_max:
        return EstimateReport(
            method='quantum', log_q_hat=0.0, epsilon=epsilon, eta=None,
            schedule=CoolingSchedule((beta_min,), c2=QUANTUM_C2, seed=seed),
            ledger=ledger.to_dict())
    schedule = generate_schedule_quantum(
        model, beta_max, settings.delta, beta_min=beta_min, backend=backend,
        rng=child_rng(seed, 0), ledger=ledger, quantum_config=settings,
        cap=cap, seed=seed)
    ell = schedule.length
    stage_epsilon = epsilon / (2 * ell)
    stage_eta = 1 / (20 * ell)
    rng = child_rng(seed, 1)
    chain = QSampleChain(model, schedule.betas[0],
                         settings.delta / 2 / max(1, ell), rng, ledger, cap,
                         settings.jump_min_overlap)
    for beta in schedule.betas[1:]:
        chain.append(prepare_qsample(model, beta, cap))

    log_q_hat = 0.0
    stages = []
    for i, (beta, beta_next) in enumerate(schedule.pairs):
        f_v, f_w = _stage_functions(model, beta, beta_next, cap)
        try:
            mean_v = quantum_mean_relative(
                chain[i], f_v, settings.variance_bound, stage_epsilon,
                stage_eta, backend, rng, ledger,
                lambda count, i=i: chain.prepare_copies(i, count))
            mean_w = quantum_mean_relative(
                chain[i + 1], f_w, settings.variance_bound, stage_epsilon,
                stage_eta, backend, rng, ledger,
                lambda count, i=i: chain.prepare_copies(i + 1, count))
        except PipelineError as e:
            raise StageError(str(e), i) from e
        if mean_v <= 0 or mean_w <= 0:
            raise StageError("non-positive stage estimate", i)
        logger.debug("stage %d: E[V] ~ %.6g, E[W] ~ %.6g", i, mean_v, mean_w)
        stages.append(QuantumStage(beta, beta_next, mean_v, mean_w))
        log_q_hat += math.log(mean_v) - math.log(mean_w)
    return EstimateReport(
        method='quantum', log_q_hat=log_q_hat, epsilon=epsilon,
        eta=stage_eta, schedule=schedule, stages=stages,
        samples_used=ledger.qsample_copies_consumed, ledger=ledger.to_dict())
