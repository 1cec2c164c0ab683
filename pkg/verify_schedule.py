import click

from gibbs_helper import load_document, load_model, verify_schedule
from gibbs_helper.console import dump_json, exit_codes
from gibbs_helper.experiment import load_schedule
from gibbs_helper.schedule import SLOWLY_VARYING_C2


@exit_codes
def _verify_schedule(model_path, schedule_path, c1=0.0,
                     c2=SLOWLY_VARYING_C2, out=None):
    """ Checks every consecutive pair of a schedule against [c1, c2] with
        the exact partition function.
    """
    model = load_model(load_document(model_path))
    schedule = load_schedule(load_document(schedule_path))
    check = verify_schedule(model, schedule, c1, c2)
    dump_json(check.to_dict(), out)
    verdict = "PASS" if check.passes else \
        f"FAIL at stages {', '.join(str(i) for i in check.violations)}"
    click.echo("{}: length {}, ratios in [{:.4g}, {:.4g}]".format(
        verdict, check.length, check.min_ratio or 0, check.max_ratio or 0),
        err=out is None)


@click.command()
@click.option('--model', 'model_path', type=click.Path(exists=True),
              required=True)
@click.option('--schedule', 'schedule_path', type=click.Path(exists=True),
              required=True)
@click.option('--c1', type=float, default=0.0)
@click.option('--c2', type=float, default=SLOWLY_VARYING_C2)
@click.option('--out', type=click.Path())
def verify_schedule_command(model_path, schedule_path, c1, c2, out):
    _verify_schedule(model_path, schedule_path, c1, c2, out)


if __name__ == '__main__':
    verify_schedule_command()
