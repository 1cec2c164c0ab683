import click

from gibbs_helper import ExperimentConfig, load_document, run_experiment
from gibbs_helper.console import dump_json, exit_codes, setup_logging
from gibbs_helper.errors import PipelineError, ValidationError
from gibbs_helper.experiment import write_trials_csv
from presets import all_presets


def _experiment_document(config_path, preset):
    if preset:
        if preset not in all_presets:
            raise ValidationError(
                f"unknown preset, try one of {', '.join(sorted(all_presets))}",
                "preset")
        return all_presets[preset]().experiment()
    if not config_path:
        raise ValidationError("pass --config or --preset", "config")
    return load_document(config_path)


def _summary_line(record):
    summary = record.summary
    line = f"{record.config['task']}: {summary.get('trials', 0)} trials"
    if summary.get('failed'):
        line += f", {summary['failed']} failed"
    if 'within_tolerance' in summary:
        line += (f", {summary['within_tolerance']} within "
                 f"{summary['tolerance']:g}")
    if 'schedules_passing' in summary:
        line += f", {summary['schedules_passing']} schedules pass"
    if record.exact:
        line += f", exact Q = {record.exact['q']:.6g}"
    return line


@exit_codes
def _run_experiment(config_path=None, preset=None, out=None, trials=None,
                    seed=None, ae_backend=None, phase_bits=None,
                    csv_path=None):
    """ Runs an experiment file or a preset and writes the JSON report.
    """
    settings = ExperimentConfig.from_dict(
        _experiment_document(config_path, preset),
        overrides={'trials': trials, 'seed': seed, 'mode': ae_backend,
                   'phase_bits': phase_bits})
    record = run_experiment(settings)
    dump_json(record.to_dict(), out)
    if csv_path:
        write_trials_csv(record, csv_path)
    click.echo(_summary_line(record), err=out is None)
    if record.all_failed:
        raise PipelineError("every trial failed")


@click.command()
@click.option('--config', 'config_path', type=click.Path(exists=True))
@click.option('--preset')
@click.option('--out', type=click.Path())
@click.option('--trials', type=int)
@click.option('--seed', type=int)
@click.option('--ae-backend', type=click.Choice(['analytic', 'statevector']))
@click.option('--phase-bits', type=int)
@click.option('--csv', 'csv_path', type=click.Path())
@click.option('--log-level')
def run(config_path, preset, out, trials, seed, ae_backend, phase_bits,
        csv_path, log_level):
    setup_logging(log_level)
    _run_experiment(config_path, preset, out, trials, seed, ae_backend,
                    phase_bits, csv_path)


if __name__ == '__main__':
    run()
