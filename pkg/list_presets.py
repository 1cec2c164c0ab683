import click

from presets import all_presets


def _list_presets():
    """ Shows every preset experiment.
    """
    for name in sorted(all_presets):
        preset = all_presets[name]
        click.echo("{:<14} {:<18} {}".format(
            name, preset.task, preset.description))


@click.command()
def presets():
    _list_presets()


if __name__ == '__main__':
    presets()
