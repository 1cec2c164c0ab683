import json

import pytest
from click.testing import CliRunner

import run_experiment as run_experiment_script
from gibbs_helper.experiment import RunRecord
from gibbsum import gibbsum
from presets import all_presets

SINGLE_EDGE = {'type': 'ising', 'vertices': 2, 'edges': [[0, 1]]}
GRID = all_presets['ising-3x3']().model()


@pytest.fixture
def runner():
    return CliRunner()


def _write(path, document):
    path.write_text(json.dumps(document))
    return str(path)


def test_presets_listing(runner):
    result = runner.invoke(gibbsum, ['presets'])
    assert result.exit_code == 0
    for name in ('ising-3x3', 'single-edge', 'potts-k3', 'colorings-c5'):
        assert name in result.output


def test_run_preset(runner, tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(gibbsum, ['run', '--preset', 'single-edge',
                                     '--out', str(out)])
    assert result.exit_code == 0
    report = json.loads(out.read_text())
    assert report['exact']['z_max'] == pytest.approx(2.7357588823428847)
    assert report['trials'] == []


def test_run_is_byte_for_byte_reproducible(runner, tmp_path):
    config = _write(tmp_path / "experiment.json", {
        'model': GRID, 'task': 'schedule-classical',
        'beta_max': 1.0, 'trials': 2, 'seed': 9})
    outputs = []
    for name in ("first.json", "second.json"):
        out = tmp_path / name
        result = runner.invoke(gibbsum, ['run', '--config', config,
                                         '--out', str(out)])
        assert result.exit_code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_run_yaml_config(runner, tmp_path):
    config = tmp_path / "experiment.yml"
    config.write_text("model:\n  type: ising\n  vertices: 2\n"
                      "  edges: [[0, 1]]\ntask: exact\nbeta_max: inf\n")
    out = tmp_path / "report.json"
    result = runner.invoke(gibbsum, ['run', '--config', str(config),
                                     '--out', str(out)])
    assert result.exit_code == 0
    assert json.loads(out.read_text())['exact']['z_max'] == \
        pytest.approx(2.0)


def test_invalid_config_exits_with_two(runner, tmp_path):
    config = _write(tmp_path / "bad.json", {
        'model': SINGLE_EDGE, 'task': 'exact', 'epsilon': 2})
    result = runner.invoke(gibbsum, ['run', '--config', config])
    assert result.exit_code == 2
    assert "epsilon" in result.output


def test_unknown_preset_exits_with_two(runner):
    result = runner.invoke(gibbsum, ['run', '--preset', 'nope'])
    assert result.exit_code == 2


def test_failed_run_exits_with_three(runner, tmp_path, monkeypatch):
    def all_failed(settings):
        return RunRecord(
            config=settings.to_dict(), seed=settings.seed, exact=None,
            trials=[{'trial': 0, 'seed': 1, 'error': {
                'type': 'JumpError', 'message': "jump failed"}}],
            summary={'trials': 1, 'failed': 1})

    monkeypatch.setattr(run_experiment_script, 'run_experiment', all_failed)
    result = runner.invoke(gibbsum, ['run', '--preset', 'ising-3x3',
                                     '--out', str(tmp_path / "r.json"),
                                     '--csv', str(tmp_path / "r.csv")])
    assert result.exit_code == 3
    assert (tmp_path / "r.json").exists()
    assert "jump failed" in (tmp_path / "r.csv").read_text()


def test_verify_schedule(runner, tmp_path):
    model = _write(tmp_path / "model.json", SINGLE_EDGE)
    schedule = _write(tmp_path / "schedule.json", [0, 1, "inf"])
    out = tmp_path / "check.json"
    result = runner.invoke(gibbsum, ['verify-schedule', '--model', model,
                                     '--schedule', schedule,
                                     '--out', str(out)])
    assert result.exit_code == 0
    check = json.loads(out.read_text())
    assert check['passes']
    assert len(check['ratios']) == 2


def test_verify_schedule_failure_still_exits_zero(runner, tmp_path):
    model = _write(tmp_path / "model.json", SINGLE_EDGE)
    schedule = _write(tmp_path / "schedule.json", [0, "inf"])
    result = runner.invoke(gibbsum, ['verify-schedule', '--model', model,
                                     '--schedule', schedule, '--c2', '1.5'])
    assert result.exit_code == 0
    assert "FAIL at stages 0" in result.output


def test_verify_schedule_bad_model(runner, tmp_path):
    model = _write(tmp_path / "model.json", {'type': 'ising',
                                             'vertices': 0})
    schedule = _write(tmp_path / "schedule.json", [0, 1])
    result = runner.invoke(gibbsum, ['verify-schedule', '--model', model,
                                     '--schedule', schedule])
    assert result.exit_code == 2
    assert "model.vertices" in result.output


def test_count_colorings_command(runner, tmp_path):
    out = tmp_path / "count.json"
    result = runner.invoke(gibbsum, ['count-colorings', '--shape', 'complete',
                                     '--order', '3', '-k', '3',
                                     '--method', 'exact', '--out', str(out)])
    assert result.exit_code == 0
    counted = json.loads(out.read_text())
    assert counted['estimate'] == 6.0
    assert counted['exact'] == 6


def test_count_colorings_from_graph_file(runner, tmp_path):
    graph = _write(tmp_path / "graph.json",
                   {'vertices': 3, 'edges': [[0, 1], [1, 2]]})
    out = tmp_path / "count.json"
    result = runner.invoke(gibbsum, ['count-colorings', '--graph', graph,
                                     '-k', '2', '--method', 'exact',
                                     '--out', str(out)])
    assert result.exit_code == 0
    assert json.loads(out.read_text())['exact'] == 2


def test_count_colorings_needs_a_graph(runner):
    result = runner.invoke(gibbsum, ['count-colorings'])
    assert result.exit_code == 2
