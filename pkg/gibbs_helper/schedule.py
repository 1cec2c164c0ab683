import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ContractViolation, DegenerateError, PreconditionError, ScheduleError)
from .models import (
    log_partition_function, log_relative_variance_pair, mean_energy)
from .util import INF, beta_to_json, parse_beta

logger = logging.getLogger(__name__)

SLOWLY_VARYING_C2 = 2e5
EST_THRESHOLD = 1500.0
PERFECT_BALANCE = math.e ** 2

LONG = 'long'
FORBIDDEN_CAPPED = 'forbidden-capped'
VARIANCE_CAPPED = 'variance-capped'
OVERLAP_CAPPED = 'overlap-capped'
EXTENSION = 'extension'
TARGET_REACHED = 'target-reached'


@dataclass(frozen=True, order=True)
class EnergyInterval:
    lo: int
    hi: int

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise ContractViolation(
                f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    def hits(self, histogram):
        """ Number of histogrammed samples with H(x) in the interval.
        """
        return int(np.sum(histogram[self.lo:self.hi + 1]))

    def to_list(self):
        return [self.lo, self.hi]


@dataclass(frozen=True)
class IntervalPartition:
    intervals: Tuple[EnergyInterval, ...]
    n: int
    q: float

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __getitem__(self, index):
        return self.intervals[index]

    @property
    def size_bound(self):
        """ 4 sqrt(q) ln n.
        """
        return 4 * math.sqrt(self.q) * math.log(self.n) if self.n > 0 else 0


def build_partition(n, q):
    """ Greedy partition of {0..n}: starting at b = 0, add {b, ...,
        b + floor(b / sqrt(q))} and continue after it. The last interval is
        clipped at n.
    """
    if n < 1 or q <= 0:
        raise PreconditionError(f"need n >= 1 and q > 0, got n={n}, q={q}")
    root_q = math.sqrt(q)
    intervals = []
    b = 0
    while b <= n:
        width = math.floor(b / root_q)
        intervals.append(EnergyInterval(b, min(b + width, n)))
        b += width + 1
    partition = IntervalPartition(tuple(intervals), n, q)
    if math.log(n) >= 1 and len(partition) > partition.size_bound:
        raise ContractViolation(
            f"partition has {len(partition)} intervals, bound "
            f"{partition.size_bound:.2f}")
    return partition


def sample_size(heaviness, delta):
    """ s = ceil((8 / h) ln(1 / delta)).
    """
    return math.ceil(8 / heaviness * math.log(1 / delta))


def interval_fraction(interval, beta, size, sampler, model):
    histogram = sampler.energy_histogram(model, beta, size)
    return interval.hits(histogram) / size


def is_heavy(interval, beta, heaviness, delta, sampler, model):
    """ True when at least a 2h fraction of s samples lands in the interval.
        False positives (interval not h-heavy) and false negatives (interval
        4h-heavy) each have probability at most delta.
    """
    if not (0 < heaviness <= 1 and 0 < delta <= 1):
        raise PreconditionError("need h, delta in (0, 1]")
    size = sample_size(heaviness, delta)
    return interval_fraction(interval, beta, size, sampler, model) \
        >= 2 * heaviness


def log_est_formula(interval, beta2, beta1, u1, u2):
    """ ln Est(I, beta2, beta1) = ln(U1 / U2) + b (beta1 - beta2).
    """
    if u2 <= 0:
        raise DegenerateError("Est denominator U2 is zero")
    if u1 <= 0:
        return -INF
    return math.log(u1) - math.log(u2) + interval.lo * (beta1 - beta2)


def est_ratio(interval, beta2, beta1, heaviness, delta, sampler, model,
              retries=1):
    """ Crude estimate of Z(beta2) / Z(beta1) from the interval's weights at
        both temperatures; within a factor 4e with probability >= 1 - 4 delta
        when the interval is h-heavy at both. Returned in log form.

        A zero count at beta2 is retried with twice the samples `retries`
        times before giving up.
    """
    if abs(beta1 - beta2) * interval.width > 1 + 1e-9:
        raise PreconditionError(
            f"|beta1 - beta2| (c - b) = "
            f"{abs(beta1 - beta2) * interval.width:.4f} exceeds 1")
    size = sample_size(heaviness, delta)
    for attempt in range(retries + 1):
        u1 = interval_fraction(interval, beta1, size, sampler, model)
        u2 = interval_fraction(interval, beta2, size, sampler, model)
        if u2 > 0:
            return log_est_formula(interval, beta2, beta1, u1, u2)
        logger.info("Est: no samples of %s at beta=%.6g (attempt %d)",
                    interval.to_list(), beta2, attempt + 1)
        size *= 2
    raise DegenerateError(
        f"Est: interval {interval.to_list()} received no samples at "
        f"beta={beta2}")


def pick_heaviest(partition, forbidden, hits):
    """ Index of the non-forbidden interval with the most hits; ties go to
        the lowest index.
    """
    best = None
    for index, interval in enumerate(partition):
        if interval in forbidden:
            continue
        if best is None or hits[index] > hits[best]:
            best = index
    if best is None:
        raise ContractViolation("every interval of the partition is forbidden")
    return best


def find_heavy(partition, forbidden, beta, heaviness, delta, sampler, model):
    """ Interval of P minus F that received the most of s samples; h-heavy
        with probability >= 1 - delta |P| when h = 1/(k|P|), k >= 4.
    """
    histogram = sampler.energy_histogram(
        model, beta, sample_size(heaviness, delta))
    hits = [interval.hits(histogram) for interval in partition]
    return partition[pick_heaviest(partition, forbidden, hits)]


def binary_search(predicate, lo, hi, alpha, trace=None, start_known=False):
    """ Bisection for a monotone decreasing predicate with predicate(lo)
        true. Returns hi if predicate(hi); otherwise lambda with
        predicate(lambda) true and predicate false at some point within
        alpha above it.

        Each point is evaluated once; `trace` collects (x, value)
        pairs.
    """
    cache = {}
    if start_known:
        cache[lo] = True

    def evaluate(x):
        if x not in cache:
            cache[x] = bool(predicate(x))
            if trace is not None:
                trace.append((x, cache[x]))
        return cache[x]

    if not evaluate(lo):
        raise ContractViolation(f"predicate is false at the left end {lo}")
    if evaluate(hi):
        return hi
    low, high = lo, hi
    while high - low > alpha:
        middle = (low + high) / 2
        if evaluate(middle):
            low = middle
        else:
            high = middle
    return low


@dataclass(frozen=True)
class MoveRecord:
    tag: str
    beta_from: float
    beta_to: float
    interval: Optional[EnergyInterval] = None

    def to_dict(self):
        return {
            'tag': self.tag,
            'interval': self.interval.to_list() if self.interval else None,
            'from': beta_to_json(self.beta_from),
            'to': beta_to_json(self.beta_to),
        }


@dataclass(frozen=True)
class CoolingSchedule:
    betas: Tuple[float, ...]
    moves: Tuple[MoveRecord, ...] = ()
    c2: float = SLOWLY_VARYING_C2
    seed: Optional[int] = None
    samples_used: int = 0
    reflections: int = 0

    def __post_init__(self):
        betas = tuple(parse_beta(b) for b in self.betas)
        if not betas:
            raise ContractViolation("schedule needs at least one beta")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ContractViolation(f"betas not strictly increasing: {betas}")
        object.__setattr__(self, 'betas', betas)

    @property
    def length(self):
        """ Number of stages (consecutive pairs).
        """
        return len(self.betas) - 1

    @property
    def long_moves(self):
        return sum(1 for m in self.moves if m.tag == LONG)

    @property
    def pairs(self):
        return list(zip(self.betas, self.betas[1:]))

    def to_dict(self):
        return {
            'betas': [beta_to_json(b) for b in self.betas],
            'moves': [m.to_dict() for m in self.moves],
            'c2': self.c2,
            'seed': self.seed,
            'samples_used': self.samples_used,
            'reflections': self.reflections,
        }

    @classmethod
    def from_dict(cls, document):
        moves = []
        for m in document.get('moves', []):
            interval = m.get('interval')
            moves.append(MoveRecord(
                tag=m['tag'],
                beta_from=parse_beta(m.get('from', 0)),
                beta_to=parse_beta(m.get('to', 0)),
                interval=EnergyInterval(*interval) if interval else None))
        return cls(betas=tuple(document['betas']), moves=tuple(moves),
                   c2=float(document.get('c2', SLOWLY_VARYING_C2)),
                   seed=document.get('seed'),
                   samples_used=int(document.get('samples_used', 0)),
                   reflections=int(document.get('reflections', 0)))


def length_bound_classical(q, n):
    """ 11 sqrt(q) ln n.
    """
    return 11 * math.sqrt(q) * math.log(n)


def long_move_bound(q, n):
    """ 6 sqrt(q) ln n.
    """
    return 6 * math.sqrt(q) * math.log(n)


def length_bound_balanced(q, n):
    """ sqrt(q ln n), the perfectly-balanced schedule length bound.
    """
    return math.sqrt(q * math.log(n))


def check_gates(model):
    """ Assumptions the schedule analysis relies on. The last one only
        simplifies the sample-count bound and is reported, not enforced.
    """
    n, q = model.max_energy, model.log_state_count
    if n < 1 or math.log(n) < 1:
        raise PreconditionError(f"need ln n >= 1, got n = {n}")
    if math.log(q) < 1:
        raise PreconditionError(f"need ln q >= 1, got q = {q:.4f}")
    if model.state_count < math.log(n):
        raise PreconditionError("need |Omega| >= ln n")
    ln_n = math.log(n)
    if ln_n < 5 + math.log(math.log(q) + ln_n) + math.log(ln_n):
        logger.warning(
            "ln n = %.3f is below 5 + ln(ln q + ln n) + ln ln n; the "
            "schedule sample bound is not guaranteed at this size", ln_n)
    return n, q


def union_bound_calls(q, n, beta_max):
    """ T = 88 sqrt(q) ln n (ln beta_max + ln n), floored at 1.
    """
    spread = math.log(max(beta_max, 1e-300)) + math.log(n)
    return max(1.0, 88 * math.sqrt(q) * math.log(n) * max(spread, 1.0))


def schedule_sample_budget(q, n, delta):
    """ 5e4 q ln^2 n (ln q + ln n)^2 ln(1/delta) Gibbs samples.
    """
    return (5e4 * q * math.log(n) ** 2 * (math.log(q) + math.log(n)) ** 2
            * math.log(1 / delta))


def _trivial_schedule(beta_min, beta_max, c2, seed):
    if beta_min == beta_max:
        return CoolingSchedule((beta_max,), c2=c2, seed=seed)
    return CoolingSchedule(
        (beta_min, beta_max),
        (MoveRecord(EXTENSION, beta_min, beta_max),), c2=c2, seed=seed)


def generate_schedule_classical(model, beta_min, beta_max, delta, sampler,
                                seed=None):
    """ Adaptive cooling schedule with every consecutive pair
        2e5-slowly-varying with probability >= 1 - delta.

        Runs up to min(beta_max, q); a larger beta_max (including inf) is
        reached with one final extension step.
    """
    if beta_min > beta_max:
        raise PreconditionError("beta_min must not exceed beta_max")
    if beta_min == beta_max:
        return _trivial_schedule(beta_min, beta_max, SLOWLY_VARYING_C2, seed)
    n, q = check_gates(model)
    target = min(beta_max, q)
    if beta_min >= target:
        return _trivial_schedule(beta_min, beta_max, SLOWLY_VARYING_C2, seed)

    start_samples = sampler.samples_drawn
    partition = build_partition(n, q)
    heaviness = 1 / (8 * len(partition))
    sub_delta = delta / union_bound_calls(q, n, target)
    alpha = 1 / (2 * n)
    max_length = length_bound_classical(q, n)
    max_iterations = math.floor(max_length) + len(partition) + 1
    log_threshold = math.log(EST_THRESHOLD)

    betas = [beta_min]
    moves = []
    forbidden = set()
    beta_k = beta_min
    iterations = 0
    while beta_k < target:
        iterations += 1
        if iterations > max_iterations or len(betas) - 1 > max_length:
            raise ScheduleError(
                f"schedule exceeded its move budget ({len(betas) - 1} steps, "
                f"{iterations - 1} iterations, bound {max_length:.2f})",
                move_log=[m.to_dict() for m in moves])
        interval = find_heavy(partition, forbidden, beta_k, heaviness,
                              sub_delta, sampler, model)
        limit = target if interval.width == 0 else min(
            beta_k + 1 / interval.width, target)

        def still_heavy(x, interval=interval):
            return is_heavy(interval, x, heaviness, sub_delta, sampler, model)

        def balanced_enough(x, interval=interval, beta_k=beta_k):
            middle = (x + beta_k) / 2
            try:
                log_product = (
                    est_ratio(interval, beta_k, middle, heaviness, sub_delta,
                              sampler, model)
                    + est_ratio(interval, x, middle, heaviness, sub_delta,
                                sampler, model))
            except DegenerateError as e:
                raise ScheduleError(str(e), move_log=[
                    m.to_dict() for m in moves])
            return log_product <= log_threshold

        heavy_limit = binary_search(still_heavy, beta_k, limit, alpha,
                                    start_known=True)
        beta_star = binary_search(balanced_enough, beta_k, heavy_limit, alpha,
                                  start_known=True)
        if beta_star == heavy_limit == limit:
            tag = LONG
        elif beta_star == heavy_limit:
            tag = FORBIDDEN_CAPPED
            forbidden.add(interval)
        else:
            tag = VARIANCE_CAPPED
        logger.debug("move %s: %.6g -> %.6g via %s", tag, beta_k, beta_star,
                     interval.to_list())
        if beta_star > beta_k:
            moves.append(MoveRecord(tag, beta_k, beta_star, interval))
            betas.append(beta_star)
            beta_k = beta_star
        elif tag == VARIANCE_CAPPED:
            logger.info("no progress from beta=%.6g via %s", beta_k,
                        interval.to_list())

    if len(betas) - 1 > max_length:
        raise ScheduleError(
            f"schedule length {len(betas) - 1} exceeds {max_length:.2f}",
            move_log=[m.to_dict() for m in moves])
    long_moves = sum(1 for m in moves if m.tag == LONG)
    if long_moves > long_move_bound(q, n):
        raise ScheduleError(
            f"{long_moves} long moves exceed {long_move_bound(q, n):.2f}",
            move_log=[m.to_dict() for m in moves])
    if beta_max > target:
        moves.append(MoveRecord(EXTENSION, target, beta_max))
        betas.append(beta_max)
    return CoolingSchedule(
        tuple(betas), tuple(moves), c2=SLOWLY_VARYING_C2, seed=seed,
        samples_used=sampler.samples_drawn - start_samples)


@dataclass
class ScheduleCheck:
    ratios: list
    c1: float
    c2: float
    length: int
    balanced_bound: float
    classical_bound: float
    violations: list = field(default_factory=list)

    @property
    def min_ratio(self):
        return min(self.ratios) if self.ratios else None

    @property
    def max_ratio(self):
        return max(self.ratios) if self.ratios else None

    @property
    def passes(self):
        return not self.violations

    def to_dict(self):
        return {
            'ratios': self.ratios,
            'min': self.min_ratio,
            'max': self.max_ratio,
            'c1': self.c1,
            'c2': self.c2,
            'violations': self.violations,
            'length': self.length,
            'balanced_bound': self.balanced_bound,
            'classical_bound': self.classical_bound,
            'passes': self.passes,
        }


def verify_schedule(model, schedule, c1=0.0, c2=SLOWLY_VARYING_C2, cap=None):
    """ Exact Z(beta_i) Z(beta_i+1) / Z(mid)^2 for every consecutive pair,
        checked against [c1, c2].
    """
    betas = schedule.betas if isinstance(schedule, CoolingSchedule) \
        else tuple(parse_beta(b) for b in schedule)
    ratios = [math.exp(log_relative_variance_pair(model, b1, b2, cap))
              for b1, b2 in zip(betas, betas[1:])]
    violations = [i for i, r in enumerate(ratios) if not c1 <= r <= c2]
    n, q = model.max_energy, model.log_state_count
    ln_n = math.log(n) if n > 1 else 0.0
    return ScheduleCheck(
        ratios=ratios, c1=c1, c2=c2, length=len(betas) - 1,
        balanced_bound=math.sqrt(q * ln_n),
        classical_bound=11 * math.sqrt(q) * ln_n,
        violations=violations)


def _pair_gap(model, x, y, cap):
    return log_relative_variance_pair(model, x, y, cap) - 2


def perfectly_balanced_schedule(model, beta_min, beta_max, cap=None,
                                max_steps=10000):
    """ Schedule whose consecutive ratios equal e^2 exactly (last one at
        most e^2). Needs the exact partition function.
    """
    betas = [beta_min]
    beta = beta_min
    while beta < beta_max and len(betas) <= max_steps:
        if _pair_gap(model, beta, beta_max, cap) <= 0:
            betas.append(beta_max)
            break
        upper = beta_max
        if math.isinf(upper):
            upper = beta + 1.0
            while _pair_gap(model, beta, upper, cap) < 0:
                upper = beta + 2 * (upper - beta)
        beta = brentq(lambda y: _pair_gap(model, beta, y, cap), beta, upper,
                      xtol=1e-12)
        betas.append(beta)
    return CoolingSchedule(tuple(betas), c2=PERFECT_BALANCE)


def balanced_length_bound(model, beta_min, beta_max, cap=None):
    """ sqrt((f(beta_min) - f(beta_max)) * 1/2 ln(f'(beta_min) /
        f'(beta_max))) with f = ln Z.
    """
    drop = (log_partition_function(model, beta_min, cap)
            - log_partition_function(model, beta_max, cap))
    slope_min = mean_energy(model, beta_min, cap)
    slope_max = mean_energy(model, beta_max, cap)
    if slope_max == 0:
        return INF
    return math.sqrt(drop * 0.5 * math.log(slope_min / slope_max))
