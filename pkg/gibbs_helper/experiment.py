import concurrent.futures
import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from .config import config
from .errors import (
    EnumerationInfeasible, PipelineError, PreconditionError, ScheduleError,
    StageError, ValidationError)
from .estimator import EstimatorConfig, estimate_ratio_classical
from .models import (
    PottsModel, exact_partition_function, load_model,
    log_partition_function, model_to_dict)
from .qsim import (
    QUANTUM_C2, AEBackend, QuantumConfig, ResourceLedger,
    estimate_ratio_quantum, generate_schedule_quantum)
from .sampling import Sampler, SamplerConfig
from .schedule import (
    SLOWLY_VARYING_C2, CoolingSchedule, check_gates,
    generate_schedule_classical, verify_schedule)
from .util import INF, beta_to_json, child_rng, parse_beta, trial_seed

logger = logging.getLogger(__name__)

TASKS = ('exact', 'schedule-classical', 'schedule-quantum',
         'estimate-classical', 'estimate-quantum', 'count-colorings')
COUNT_METHODS = ('classical', 'quantum', 'exact')


def _probability(document, name, default):
    value = document.get(name, default)
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError("must be a number", name)
    if not 0 < value < 1:
        raise ValidationError("must be in (0, 1)", name)
    return value


def _beta(document, name, default):
    try:
        return parse_beta(document.get(name, default))
    except (TypeError, ValueError) as e:
        raise ValidationError(str(e), name)


def _count(document, name, default, minimum):
    value = document.get(name, default)
    if isinstance(value, bool) or not isinstance(value, int) \
            or value < minimum:
        raise ValidationError(f"must be an integer >= {minimum}", name)
    return value


def _section(document, name, factory):
    section = document.get(name) or {}
    if not isinstance(section, dict):
        raise ValidationError("must be a mapping", name)
    try:
        return factory(**section)
    except TypeError as e:
        raise ValidationError(str(e), name)


@dataclass(frozen=True)
class ExperimentConfig:
    model: object
    task: str
    beta_min: float = 0.0
    beta_max: float = 1.0
    epsilon: float = 0.2
    eta: float = 0.05
    delta: float = 0.1
    seed: int = 0
    trials: int = 1
    method: str = 'classical'
    variance_bound: Optional[float] = None
    record_timings: bool = False
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    ae_backend: AEBackend = field(default_factory=AEBackend)

    @classmethod
    def from_dict(cls, document, overrides=None):
        """ Validates an experiment document; `overrides` (from the command
            line) replace top-level keys and `ae_backend` entries.
        """
        if not isinstance(document, dict):
            raise ValidationError("experiment must be a mapping", "config")
        document = dict(document)
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key in ('mode', 'phase_bits'):
                backend = dict(document.get('ae_backend') or {})
                backend[key] = value
                document['ae_backend'] = backend
            else:
                document[key] = value

        task = document.get('task')
        if task not in TASKS:
            raise ValidationError(f"must be one of {', '.join(TASKS)}",
                                  "task")
        model = load_model(document.get('model'))
        beta_min = _beta(document, 'beta_min', 0.0)
        beta_max = _beta(document, 'beta_max',
                         INF if task == 'count-colorings' else 1.0)
        if math.isinf(beta_min):
            raise ValidationError("must be finite", "beta_min")
        if beta_min > beta_max:
            raise ValidationError("must not exceed beta_max", "beta_min")
        method = document.get('method', 'classical')
        if method not in COUNT_METHODS:
            raise ValidationError(
                f"must be one of {', '.join(COUNT_METHODS)}", "method")
        if task == 'count-colorings' and not isinstance(model, PottsModel):
            raise ValidationError("count-colorings needs a potts model",
                                  "model.type")
        variance_bound = document.get('variance_bound')
        if variance_bound is not None and (
                isinstance(variance_bound, bool)
                or not isinstance(variance_bound, (int, float))
                or variance_bound <= 0):
            raise ValidationError("must be a positive number",
                                  "variance_bound")
        sampler = _section(document, 'sampler', SamplerConfig)
        return cls(
            model=model, task=task, beta_min=beta_min, beta_max=beta_max,
            epsilon=_probability(document, 'epsilon', 0.2),
            eta=_probability(document, 'eta', 0.05),
            delta=_probability(document, 'delta', 0.1),
            seed=_count(document, 'seed', 0, 0),
            trials=_count(document, 'trials', 1, 1),
            method=method, variance_bound=variance_bound,
            record_timings=bool(document.get('record_timings', False)),
            sampler=sampler,
            ae_backend=_section(document, 'ae_backend', AEBackend))

    @property
    def estimator_config(self):
        settings = {'delta': self.delta, 'eta': self.eta}
        if self.variance_bound is not None:
            settings['variance_bound'] = float(self.variance_bound)
        return EstimatorConfig(**settings)

    @property
    def quantum_config(self):
        return QuantumConfig(delta=self.delta)

    def to_dict(self):
        return {
            'model': model_to_dict(self.model),
            'task': self.task,
            'beta_min': beta_to_json(self.beta_min),
            'beta_max': beta_to_json(self.beta_max),
            'epsilon': self.epsilon,
            'eta': self.eta,
            'delta': self.delta,
            'seed': self.seed,
            'trials': self.trials,
            'method': self.method,
            'variance_bound': self.variance_bound,
            'record_timings': self.record_timings,
            'sampler': self.sampler.to_dict(),
            'ae_backend': self.ae_backend.to_dict(),
        }


@dataclass
class RunRecord:
    config: dict
    seed: int
    exact: Optional[dict]
    trials: list
    summary: dict = field(default_factory=dict)

    @property
    def failures(self):
        return [t for t in self.trials if t.get('error')]

    @property
    def all_failed(self):
        return bool(self.trials) and len(self.failures) == len(self.trials)

    def to_dict(self):
        return {'config': self.config, 'seed': self.seed,
                'exact': self.exact, 'trials': self.trials,
                'summary': self.summary}


def exact_reference(model, beta_min, beta_max):
    """ Z at both ends and their ratio, or None when |Omega| is too large.
    """
    try:
        log_min = log_partition_function(model, beta_min)
        log_max = log_partition_function(model, beta_max)
    except EnumerationInfeasible:
        return None
    return {
        'beta_min': beta_to_json(beta_min),
        'beta_max': beta_to_json(beta_max),
        'log_z_min': log_min, 'log_z_max': log_max,
        'z_min': math.exp(log_min), 'z_max': math.exp(log_max),
        'q': math.exp(log_max - log_min),
    }


def _error_entry(error):
    entry = {'type': type(error).__name__, 'message': str(error)}
    if isinstance(error, StageError):
        entry['stage'] = error.stage
    if isinstance(error, ScheduleError):
        entry['move_log'] = error.move_log
    return entry


def _relative_error(estimate, exact):
    return abs(estimate - exact) / exact


def _estimate_trial(settings, seed, exact):
    if settings.task == 'estimate-quantum':
        report = estimate_ratio_quantum(
            settings.model, settings.beta_min, settings.beta_max,
            settings.epsilon, settings.ae_backend, seed,
            settings.quantum_config)
    else:
        sampler = Sampler(settings.sampler, np.random.SeedSequence(seed))
        report = estimate_ratio_classical(
            settings.model, settings.beta_min, settings.beta_max,
            settings.epsilon, sampler, settings.estimator_config, seed=seed)
    result = report.to_dict()
    if exact is not None:
        result['relative_error'] = _relative_error(report.q_hat, exact['q'])
    return result


def _schedule_trial(settings, seed, exact):
    if settings.task == 'schedule-quantum':
        ledger = ResourceLedger()
        schedule = generate_schedule_quantum(
            settings.model, settings.beta_max, settings.delta,
            beta_min=settings.beta_min, backend=settings.ae_backend,
            rng=child_rng(seed, 0), ledger=ledger,
            quantum_config=settings.quantum_config, seed=seed)
        c2, resources = QUANTUM_C2, ledger.to_dict()
    else:
        sampler = Sampler(settings.sampler, np.random.SeedSequence(seed))
        schedule = generate_schedule_classical(
            settings.model, settings.beta_min, settings.beta_max,
            settings.delta, sampler, seed=seed)
        c2, resources = SLOWLY_VARYING_C2, None
    result = {'schedule': schedule.to_dict(), 'ledger': resources,
              'schedule_length': schedule.length}
    if exact is not None:
        result['check'] = verify_schedule(settings.model, schedule,
                                          c2=c2).to_dict()
    return result


def _coloring_trial(settings, seed, exact):
    counted = count_colorings(
        settings.model, settings.model.color_count, settings.epsilon,
        settings.method, seed=seed, sampler_config=settings.sampler,
        backend=settings.ae_backend)
    result = counted.to_dict()
    if counted.exact:
        result['relative_error'] = _relative_error(counted.estimate,
                                                   counted.exact)
    return result


TRIAL_RUNNERS = {
    'schedule-classical': _schedule_trial,
    'schedule-quantum': _schedule_trial,
    'estimate-classical': _estimate_trial,
    'estimate-quantum': _estimate_trial,
    'count-colorings': _coloring_trial,
}


def run_trial(settings, trial, exact):
    seed = trial_seed(settings.seed, trial)
    started = time.perf_counter()
    try:
        result = TRIAL_RUNNERS[settings.task](settings, seed, exact)
        result['error'] = None
    except PipelineError as e:
        logger.warning("trial %d failed: %s", trial, e)
        result = {'error': _error_entry(e)}
    result.update({'trial': trial, 'seed': seed})
    if settings.record_timings:
        result['wall_clock'] = time.perf_counter() - started
    return result


def _summary(settings, trials):
    summary = {'trials': len(trials),
               'failed': sum(1 for t in trials if t.get('error'))}
    errors = [t['relative_error'] for t in trials
              if t.get('relative_error') is not None]
    if errors:
        tolerance = settings.epsilon
        if settings.task == 'estimate-quantum' or (
                settings.task == 'count-colorings'
                and settings.method == 'quantum'):
            tolerance = 2 * settings.epsilon
        summary['tolerance'] = tolerance
        summary['within_tolerance'] = sum(1 for e in errors if e <= tolerance)
        summary['median_relative_error'] = float(np.median(errors))
    checks = [t['check']['passes'] for t in trials if t.get('check')]
    if checks:
        summary['schedules_passing'] = sum(checks)
    ledgers = [t['ledger'] for t in trials if t.get('ledger')]
    if ledgers:
        summary['ledger_totals'] = {
            key: sum(ledger[key] for ledger in ledgers)
            for key in ledgers[0]}
    samples = [t['samples_used'] for t in trials
               if t.get('samples_used') is not None]
    if samples:
        summary['samples_used'] = sum(samples)
    return summary


def run_experiment(settings, workers=None):
    """ Runs every trial of a validated ExperimentConfig and attaches the
        exact reference when the state space can be enumerated.
    """
    if isinstance(settings, dict):
        settings = ExperimentConfig.from_dict(settings)
    exact = exact_reference(settings.model, settings.beta_min,
                            settings.beta_max)
    if settings.task == 'exact':
        if exact is None:
            raise EnumerationInfeasible(
                f"|Omega| = {settings.model.state_count} is too large for "
                f"task exact")
        return RunRecord(config=settings.to_dict(), seed=settings.seed,
                         exact=exact, trials=[])
    workers = workers or int(config['WORKERS'])
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        trials = list(pool.map(
            lambda trial: run_trial(settings, trial, exact),
            range(settings.trials)))
    return RunRecord(config=settings.to_dict(), seed=settings.seed,
                     exact=exact, trials=trials,
                     summary=_summary(settings, trials))


@dataclass
class ColoringCount:
    estimate: float
    exact: Optional[int]
    method: str
    k: int
    vertices: int
    report: Optional[object] = None

    def to_dict(self):
        return {
            'estimate': self.estimate,
            'exact': self.exact,
            'method': self.method,
            'k': self.k,
            'vertices': self.vertices,
            'schedule_length': self.report.schedule_length
            if self.report else 0,
            'samples_used': self.report.samples_used if self.report else 0,
            'ledger': self.report.ledger if self.report else None,
        }


def _coloring_model(graph, k):
    if isinstance(graph, PottsModel):
        return PottsModel(vertex_count=graph.vertex_count, edges=graph.edges,
                          color_count=k)
    if isinstance(graph, nx.Graph):
        graph = nx.convert_node_labels_to_integers(graph, ordering="sorted")
        return PottsModel(vertex_count=graph.number_of_nodes(),
                          edges=tuple(graph.edges()), color_count=k)
    vertices, edges = graph
    return PottsModel(vertex_count=vertices,
                      edges=tuple(tuple(e) for e in edges), color_count=k)


def count_colorings(graph, k, epsilon, method='classical', seed=0,
                    sampler_config=None, backend=None):
    """ Number of proper k-colorings, Z_potts(inf), estimated as
        Q_hat k^|V| with Q = Z(inf) / Z(0).
    """
    if k < 2:
        raise ValidationError("k must be >= 2", "k")
    if method not in COUNT_METHODS:
        raise ValidationError(
            f"must be one of {', '.join(COUNT_METHODS)}", "method")
    model = _coloring_model(graph, k)
    log_all = model.vertex_count * math.log(k)
    if model.max_energy == 0:
        total = k ** model.vertex_count
        return ColoringCount(estimate=float(total), exact=total,
                             method=method, k=k,
                             vertices=model.vertex_count)
    try:
        exact = round(exact_partition_function(model, INF))
    except EnumerationInfeasible:
        exact = None
    except PreconditionError:
        # no proper coloring at all
        exact = 0
    if method == 'exact':
        if exact is None:
            raise EnumerationInfeasible(
                f"k^|V| = {model.state_count} is too large to enumerate")
        return ColoringCount(estimate=float(exact), exact=exact,
                             method=method, k=k, vertices=model.vertex_count)
    try:
        check_gates(model)
    except PreconditionError as error:
        raise PreconditionError(
            f"{error}; graph is too small for the '{method}' estimator, "
            "use method 'exact'", "method") from error
    if method == 'quantum':
        report = estimate_ratio_quantum(model, 0.0, INF, epsilon, backend,
                                        seed)
    else:
        sampler = Sampler(sampler_config or SamplerConfig(),
                          np.random.SeedSequence(seed))
        report = estimate_ratio_classical(model, 0.0, INF, epsilon, sampler,
                                          seed=seed)
    return ColoringCount(estimate=math.exp(report.log_q_hat + log_all),
                         exact=exact, method=method, k=k,
                         vertices=model.vertex_count, report=report)


CSV_FIELDS = ('trial', 'seed', 'q_hat', 'estimate', 'relative_error',
              'samples_used', 'schedule_length', 'reflections', 'error')


def trial_rows(record):
    for trial in record.trials:
        ledger = trial.get('ledger') or {}
        error = trial.get('error')
        yield {
            'trial': trial['trial'],
            'seed': trial['seed'],
            'q_hat': trial.get('q_hat'),
            'estimate': trial.get('estimate'),
            'relative_error': trial.get('relative_error'),
            'samples_used': trial.get('samples_used'),
            'schedule_length': trial.get('schedule_length'),
            'reflections': ledger.get('reflections_invoked'),
            'error': error['message'] if error else None,
        }


def write_trials_csv(record, path):
    """ One row per trial.
    """
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in trial_rows(record):
            writer.writerow(row)


def load_schedule(document):
    """ Accepts a bare list of betas, a schedule document, or a trial or
        report entry holding one under `schedule`.
    """
    if isinstance(document, list):
        document = {'betas': document}
    if isinstance(document, dict) and 'betas' not in document \
            and isinstance(document.get('schedule'), dict):
        document = document['schedule']
    if not isinstance(document, dict):
        raise ValidationError("must be a list or a mapping", "schedule")
    try:
        return CoolingSchedule.from_dict(document)
    except KeyError as e:
        raise ValidationError("missing field", f"schedule.{e.args[0]}")
    except (TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(str(e), "schedule")
