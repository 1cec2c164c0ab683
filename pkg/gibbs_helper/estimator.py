import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateError, PreconditionError, ValidationError
from .models import log_partition_function, midpoint
from .schedule import (
    SLOWLY_VARYING_C2, CoolingSchedule, generate_schedule_classical)
from .util import INF, beta_to_json, log_mean_exp, scaled_energies

logger = logging.getLogger(__name__)

SCHEDULE_DELTA = 0.1
ESTIMATION_ETA = 0.05


def _check_probability(value, name):
    if not 0 < value < 1:
        raise ValidationError("must be in (0, 1)", name)


@dataclass(frozen=True)
class EstimatorConfig:
    delta: float = SCHEDULE_DELTA
    eta: float = ESTIMATION_ETA
    variance_bound: float = SLOWLY_VARYING_C2

    def __post_init__(self):
        _check_probability(self.delta, "estimator.delta")
        _check_probability(self.eta, "estimator.eta")
        if self.variance_bound <= 0:
            raise ValidationError("must be > 0", "estimator.variance_bound")

    def to_dict(self):
        return {'delta': self.delta, 'eta': self.eta,
                'variance_bound': self.variance_bound}


@dataclass(frozen=True)
class PairedSampleSpec:
    """ Stage layout of the paired-product estimator on a schedule: stage i
        pairs beta_i with beta_i+1 around their midpoint, d = half the gap.
    """
    model: object
    schedule: CoolingSchedule

    @property
    def midpoints(self):
        return [midpoint(b1, b2) for b1, b2 in self.schedule.pairs]

    @property
    def semi_distances(self):
        return [INF if math.isinf(b2) else (b2 - b1) / 2
                for b1, b2 in self.schedule.pairs]


@dataclass(frozen=True)
class LogSampleSet:
    """ Samples of a positive random variable kept as logs, grouped by
        distinct value: `counts[j]` draws took the value exp(log_values[j]).
    """
    log_values: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=float)
        with np.errstate(divide='ignore'):
            return cls(np.log(values), np.ones(values.size, dtype=np.int64))

    @property
    def size(self):
        return int(np.sum(self.counts))

    def log_mean(self):
        if self.size == 0:
            raise DegenerateError("stage has no samples")
        return log_mean_exp(self.log_values, self.counts)


@dataclass(frozen=True)
class StageSamples:
    beta: float
    beta_next: float
    v: LogSampleSet
    w: LogSampleSet

    def to_dict(self):
        log_v, log_w = self.v.log_mean(), self.w.log_mean()
        return {'beta': beta_to_json(self.beta),
                'beta_next': beta_to_json(self.beta_next),
                'log_mean_v': log_v, 'log_mean_w': log_w,
                'samples': self.v.size}


@dataclass
class EstimateReport:
    method: str
    log_q_hat: float
    epsilon: Optional[float]
    eta: Optional[float]
    samples_used: int = 0
    schedule: Optional[CoolingSchedule] = None
    stages: list = field(default_factory=list)
    samples_per_stage: int = 0
    ledger: Optional[dict] = None

    @property
    def q_hat(self):
        return math.exp(self.log_q_hat)

    @property
    def schedule_length(self):
        return self.schedule.length if self.schedule else 0

    def to_dict(self):
        return {
            'method': self.method,
            'q_hat': self.q_hat,
            'log_q_hat': self.log_q_hat,
            'epsilon': self.epsilon,
            'eta': self.eta,
            'samples_used': self.samples_used,
            'samples_per_stage': self.samples_per_stage,
            'schedule_length': self.schedule_length,
            'schedule': self.schedule.to_dict() if self.schedule else None,
            'stages': [s.to_dict() for s in self.stages],
            'ledger': self.ledger,
        }


def relative_variance_naive(h, beta_min, beta_max, cap=None):
    """ S of the one-sample estimator e^{-(beta_max - beta_min) H(x)}:
        Z(2 beta_max - beta_min) Z(beta_min) / Z(beta_max)^2.
    """
    if math.isinf(beta_max):
        raise PreconditionError("2 beta_max - beta_min must be finite")
    return math.exp(log_partition_function(h, 2 * beta_max - beta_min, cap)
                    + log_partition_function(h, beta_min, cap)
                    - 2 * log_partition_function(h, beta_max, cap))


def _energy_samples(histogram, scale):
    """ exp(scale * H) over a histogram of energies, as a LogSampleSet.
    """
    levels = np.nonzero(histogram)[0]
    return LogSampleSet(scaled_energies(scale, levels), histogram[levels])


def draw_paired_samples(spec, sampler, m_per_stage):
    """ m draws at every beta of the schedule. The draws at beta_i give V_i
        = e^{-d H} and, for i > 0, W_i-1 = e^{+d H}.
    """
    if m_per_stage < 1:
        raise PreconditionError("need at least one sample per stage")
    histograms = [sampler.energy_histogram(spec.model, beta, m_per_stage)
                  for beta in spec.schedule.betas]
    stages = []
    for i, (d, (beta, beta_next)) in enumerate(
            zip(spec.semi_distances, spec.schedule.pairs)):
        stages.append(StageSamples(
            beta=beta, beta_next=beta_next,
            v=_energy_samples(histograms[i], -d),
            w=_energy_samples(histograms[i + 1], d)))
    return stages


def dyer_frieze_plan(B, ell, eta, epsilon):
    """ m = ceil(2 B ell / (eta epsilon^2)) samples per stage.
    """
    if B <= 0:
        raise PreconditionError("B must be positive")
    if not (0 < eta < 1 and 0 < epsilon < 1):
        raise PreconditionError("need eta, epsilon in (0, 1)")
    # rounding guard: 2 / (0.1 * 0.25) lands a hair above 80 in floats
    return math.ceil(round(2 * B * ell / (eta * epsilon ** 2), 9))


def _as_sample_set(stage):
    if isinstance(stage, LogSampleSet):
        return stage
    return LogSampleSet.from_values(stage)


def log_product_mean_estimate(stages):
    total = 0.0
    for index, stage in enumerate(stages):
        log_mean = _as_sample_set(stage).log_mean()
        if log_mean == -INF:
            raise DegenerateError(f"stage {index} has zero sample mean")
        total += log_mean
    return total


def product_mean_estimate(stages):
    """ Product of the per-stage sample means.
    """
    return math.exp(log_product_mean_estimate(stages))


def exact_stage_log_means(model, schedule, cap=None):
    """ (ln E[V_i], ln E[W_i]) from the exact partition function:
        E[V_i] = Z(mid)/Z(beta_i), E[W_i] = Z(mid)/Z(beta_i+1).
    """
    means = []
    for b1, b2 in schedule.pairs:
        log_mid = log_partition_function(model, midpoint(b1, b2), cap)
        means.append((log_mid - log_partition_function(model, b1, cap),
                      log_mid - log_partition_function(model, b2, cap)))
    return means


def telescoping_ratio(model, schedule, cap=None):
    """ prod E[V_i] / prod E[W_i] with exact stage means; equals
        Z(beta_max) / Z(beta_min) on any schedule.
    """
    means = exact_stage_log_means(model, schedule, cap)
    return math.exp(sum(v - w for v, w in means))


def _trivial_report(method, epsilon, eta, beta):
    return EstimateReport(method=method, log_q_hat=0.0, epsilon=epsilon,
                          eta=eta, schedule=CoolingSchedule((beta,)))


def estimate_ratio_classical(model, beta_min, beta_max, epsilon, sampler,
                             estimator_config=None, seed=None):
    """ Z(beta_max) / Z(beta_min) within relative error epsilon with
        probability >= 4/5: adaptive schedule, then paired products of
        Dyer-Frieze size with epsilon / 3 on each of the V and W products.
    """
    _check_probability(epsilon, "epsilon")
    settings = estimator_config or EstimatorConfig()
    if beta_min == beta_max:
        return _trivial_report('classical', epsilon, settings.eta, beta_min)
    schedule = generate_schedule_classical(
        model, beta_min, beta_max, settings.delta, sampler, seed=seed)
    m = dyer_frieze_plan(settings.variance_bound, schedule.length,
                         settings.eta, epsilon / 3)
    logger.info("classical: %d stages, m = %d per temperature",
                schedule.length, m)
    stages = draw_paired_samples(PairedSampleSpec(model, schedule), sampler,
                                 m)
    log_v = log_product_mean_estimate([s.v for s in stages])
    log_w = log_product_mean_estimate([s.w for s in stages])
    return EstimateReport(
        method='classical', log_q_hat=log_v - log_w, epsilon=epsilon,
        eta=settings.eta, schedule=schedule, stages=stages,
        samples_per_stage=m,
        samples_used=schedule.samples_used + (schedule.length + 1) * m)


def estimate_ratio_product(model, schedule, m_per_stage, sampler):
    """ Baseline product estimator: X_i = e^{-(beta_i+1 - beta_i) H(x_i)}
        with x_i ~ mu_beta_i, E[X_i] = Z(beta_i+1) / Z(beta_i).
    """
    stages = []
    for beta, beta_next in schedule.pairs:
        gap = INF if math.isinf(beta_next) else beta_next - beta
        histogram = sampler.energy_histogram(model, beta, m_per_stage)
        stages.append(_energy_samples(histogram, -gap))
    return EstimateReport(
        method='product', log_q_hat=log_product_mean_estimate(stages),
        epsilon=None, eta=None, schedule=schedule,
        samples_per_stage=m_per_stage,
        samples_used=schedule.length * m_per_stage)
