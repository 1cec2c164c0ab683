import click

from gibbs_helper import count_colorings, load_document
from gibbs_helper.console import dump_json, exit_codes
from gibbs_helper.errors import ValidationError
from gibbs_helper.models import complete_graph, cycle_graph, path_graph

GRAPH_SHAPES = {
    'complete': complete_graph,
    'cycle': cycle_graph,
    'path': path_graph,
}


def _graph(graph_path, shape, order):
    if graph_path:
        document = load_document(graph_path)
        if not isinstance(document, dict) or 'vertices' not in document:
            raise ValidationError("needs vertices and edges", "graph")
        return document['vertices'], document.get('edges', [])
    if shape and order:
        return GRAPH_SHAPES[shape](order)
    raise ValidationError("pass --graph or --shape with --order", "graph")


@exit_codes
def _count_colorings(graph_path=None, shape=None, order=None, k=3,
                     epsilon=0.25, method='classical', seed=0, out=None):
    """ Counts proper k-colorings of a graph.
    """
    counted = count_colorings(_graph(graph_path, shape, order), k, epsilon,
                              method, seed=seed)
    dump_json(counted.to_dict(), out)
    exact = "unknown" if counted.exact is None else counted.exact
    click.echo(f"{counted.estimate:.6g} proper {k}-colorings "
               f"(exact {exact})", err=out is None)


@click.command()
@click.option('--graph', 'graph_path', type=click.Path(exists=True))
@click.option('--shape', type=click.Choice(sorted(GRAPH_SHAPES)))
@click.option('--order', type=int)
@click.option('-k', '--colors', 'k', type=int, default=3)
@click.option('--epsilon', type=float, default=0.25)
@click.option('--method', type=click.Choice(['classical', 'quantum', 'exact']),
              default='classical')
@click.option('--seed', type=int, default=0)
@click.option('--out', type=click.Path())
def count_colorings_command(graph_path, shape, order, k, epsilon, method,
                            seed, out):
    _count_colorings(graph_path, shape, order, k, epsilon, method, seed, out)


if __name__ == '__main__':
    count_colorings_command()
