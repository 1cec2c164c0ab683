import click

from count_colorings import _count_colorings, GRAPH_SHAPES
from gibbs_helper.console import setup_logging
from gibbs_helper.schedule import SLOWLY_VARYING_C2
from list_presets import _list_presets
from run_experiment import _run_experiment
from verify_schedule import _verify_schedule


@click.group()
@click.option('--log-level')
def gibbsum(log_level):
    setup_logging(log_level)


@gibbsum.command()
@click.option('--config', 'config_path', type=click.Path(exists=True))
@click.option('--preset')
@click.option('--out', type=click.Path())
@click.option('--trials', type=int)
@click.option('--seed', type=int)
@click.option('--ae-backend', type=click.Choice(['analytic', 'statevector']))
@click.option('--phase-bits', type=int)
@click.option('--csv', 'csv_path', type=click.Path())
def run(config_path, preset, out, trials, seed, ae_backend, phase_bits,
        csv_path):
    _run_experiment(config_path, preset, out, trials, seed, ae_backend,
                    phase_bits, csv_path)


@gibbsum.command()
@click.option('--model', 'model_path', type=click.Path(exists=True),
              required=True)
@click.option('--schedule', 'schedule_path', type=click.Path(exists=True),
              required=True)
@click.option('--c1', type=float, default=0.0)
@click.option('--c2', type=float, default=SLOWLY_VARYING_C2)
@click.option('--out', type=click.Path())
def verify_schedule(model_path, schedule_path, c1, c2, out):
    _verify_schedule(model_path, schedule_path, c1, c2, out)


@gibbsum.command()
@click.option('--graph', 'graph_path', type=click.Path(exists=True))
@click.option('--shape', type=click.Choice(sorted(GRAPH_SHAPES)))
@click.option('--order', type=int)
@click.option('-k', '--colors', 'k', type=int, default=3)
@click.option('--epsilon', type=float, default=0.25)
@click.option('--method', type=click.Choice(['classical', 'quantum', 'exact']),
              default='classical')
@click.option('--seed', type=int, default=0)
@click.option('--out', type=click.Path())
def count_colorings(graph_path, shape, order, k, epsilon, method, seed, out):
    _count_colorings(graph_path, shape, order, k, epsilon, method, seed, out)


@gibbsum.command()
def presets():
    _list_presets()


if __name__ == '__main__':
    gibbsum()
