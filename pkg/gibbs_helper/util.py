import math

import numpy as np
from scipy.special import logsumexp

INF = math.inf


def parse_beta(value):
    """ Accepts numbers and the strings "inf" / "infinity".
    """
    if isinstance(value, str):
        if value.strip().lower() in ('inf', 'infinity', '+inf'):
            return INF
        value = float(value)
    value = float(value)
    if math.isnan(value) or value < 0:
        raise ValueError(f"inverse temperature must be >= 0, got {value}")
    return value


def beta_to_json(beta):
    return "inf" if math.isinf(beta) else beta


def scaled_energies(scale, energies):
    """ scale * H elementwise with the convention 0 * inf = 0, so beta = inf
        (or an infinite semi-distance) only kills positive energies.
    """
    energies = np.asarray(energies, dtype=float)
    if math.isinf(scale):
        out = np.zeros_like(energies)
        out[energies > 0] = math.copysign(INF, scale)
        return out
    return scale * energies


def log_mean_exp(log_values, counts=None):
    """ ln of the (count-weighted) mean of exp(log_values).
    """
    log_values = np.asarray(log_values, dtype=float)
    if counts is None:
        return float(logsumexp(log_values) - math.log(log_values.size))
    counts = np.asarray(counts, dtype=float)
    mask = counts > 0
    return float(logsumexp(log_values[mask], b=counts[mask])
                 - math.log(counts.sum()))


def child_rng(seed, *keys):
    """ Deterministic generator for a (seed, trial, phase, ...) path.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(
        int(k) for k in keys))
    return np.random.default_rng(sequence)


def chunk_gen(total, size=1 << 20):
    """ Splits a draw of `total` items into batches of at most `size`.
    """
    for pos in range(0, total, size):
        yield min(size, total - pos)


def trial_seed(seed, trial):
    """ 64-bit seed of one trial, independent of every other trial.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(
        int(trial),))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
