import json
import os

import numpy as np
import pytest

from dslashsuite import cli
from dslashsuite.dslash import DDAGD, flop_count
from dslashsuite.reader import load, read_csv

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')


def _gen(folder, *extra):
    assert cli.main(['gen', '--dims', '4,2,2,2', '--seed', '7', '--out', str(folder)] + list(extra)) == cli.EXIT_OK
    return os.path.join(str(folder), 'gauge.dsf')


def _bytes(fname):
    with open(fname, 'rb') as f:
        return f.read()


@pytest.fixture(scope='module')
def gauge_dir(tmp_path_factory):
    folder = tmp_path_factory.mktemp('gen')
    _gen(folder)
    return folder


def test_gen_hot(gauge_dir):
    g = load(os.path.join(str(gauge_dir), 'gauge.dsf'), kind='gauge', dims=(4, 2, 2, 2))
    assert not g.compressed
    manifest = json.load(open(os.path.join(str(gauge_dir), 'manifest.json')))
    assert manifest['subcommand'] == 'gen'
    assert manifest['parameters']['dims'] == [4, 2, 2, 2]
    assert manifest['parameters']['seed'] == 7
    assert manifest['outputs'] == ['gauge.dsf']


def test_gen_is_deterministic(tmp_path, gauge_dir):
    again = _gen(tmp_path / 'a')
    assert _bytes(again) == _bytes(os.path.join(str(gauge_dir), 'gauge.dsf'))
    parallel = _gen(tmp_path / 'b', '--jobs', '2')
    assert _bytes(parallel) == _bytes(again)


def test_gen_cold_and_compressed(tmp_path):
    cold = load(_gen(tmp_path / 'cold', '--start', 'cold'))
    np.testing.assert_array_equal(cold.links, np.broadcast_to(np.eye(3), cold.links.shape))
    packed = load(_gen(tmp_path / 'packed', '--compressed', '--precision', 'single'))
    assert packed.compressed and packed.params.dtype == np.float32


def test_gen_matches_golden_file(tmp_path):
    out = tmp_path / 'cold'
    assert cli.main(['gen', '--dims', '2,2,2,2', '--start', 'cold', '--out', str(out)]) == cli.EXIT_OK
    assert _bytes(str(out / 'gauge.dsf')) == _bytes(os.path.join(DATA, 'golden_cold_2x2x2x2.dsf'))


def test_solve_single_precision_gauge(tmp_path):
    fname = _gen(tmp_path / 'low', '--precision', 'single')
    assert load(fname).precision.value == 'single'
    for algorithm in ('cg', 'rgcg'):
        out = tmp_path / algorithm
        assert cli.main(['solve', '--gauge', fname, '--source', 'manufactured', '--mass', '1.0',
                         '--algorithm', algorithm, '--out', str(out)]) == cli.EXIT_OK
        summary = read_csv(str(out / 'summary.csv'))[0]
        assert summary['converged'] == 'True'
        assert float(summary['solution_error']) < 1e-7
    assert cli.main(['bench', '--gauge', fname, '--reps', '1', '--precision', 'double']) == cli.EXIT_OK


def test_solve_manufactured(tmp_path, gauge_dir):
    out = tmp_path / 'solve'
    code = cli.main(['solve', '--gauge', str(gauge_dir), '--source', 'manufactured', '--mass', '1.0',
                     '--seed', '3', '--out', str(out)])
    assert code == cli.EXIT_OK
    for name in ('eta.dsf', 'psi.dsf', 'report.csv', 'summary.csv', 'manifest.json'):
        assert os.path.isfile(str(out / name))
    summary = read_csv(str(out / 'summary.csv'))[0]
    assert summary['algorithm'] == 'rgcg' and summary['converged'] == 'True'
    assert float(summary['solution_error']) < 1e-7
    assert int(summary['dd_high']) == int(summary['outer_iterations']) + 1
    steps = read_csv(str(out / 'report.csv'))
    assert len(steps) == int(summary['outer_iterations']) + 1


def test_cg_and_rgcg_counts(tmp_path, gauge_dir):
    summaries = {}
    for algorithm in ('cg', 'rgcg'):
        out = tmp_path / algorithm
        assert cli.main(['solve', '--gauge', str(gauge_dir), '--source', 'random', '--mass', '1.0',
                         '--algorithm', algorithm, '--out', str(out)]) == cli.EXIT_OK
        summaries[algorithm] = read_csv(str(out / 'summary.csv'))[0]
    assert int(summaries['cg']['dd_low']) == 0
    assert int(summaries['rgcg']['dd_high']) < int(summaries['cg']['dd_high'])
    psi_cg = load(str(tmp_path / 'cg' / 'psi.dsf')).data
    psi_rg = load(str(tmp_path / 'rgcg' / 'psi.dsf')).data
    assert np.linalg.norm(psi_cg - psi_rg) <= 10 * 1e-9 * np.linalg.norm(psi_cg)


def test_solve_not_converged(tmp_path, gauge_dir):
    code = cli.main(['solve', '--gauge', str(gauge_dir), '--source', 'point', '--site', '1,0,1,0',
                     '--max-outer', '1', '--out', str(tmp_path / 's')])
    assert code == cli.EXIT_NOT_CONVERGED
    assert read_csv(str(tmp_path / 's' / 'summary.csv'))[0]['converged'] == 'False'


def test_replay_is_bitwise(tmp_path, gauge_dir):
    first = tmp_path / 'first'
    assert cli.main(['solve', '--gauge', os.path.join(str(gauge_dir), 'gauge.dsf'), '--source', 'manufactured',
                     '--mass', '2.0', '--out', str(first)]) == cli.EXIT_OK
    second = tmp_path / 'second'
    assert cli.main(['replay', str(first / 'manifest.json'), '--out', str(second)]) == cli.EXIT_OK
    for name in ('eta.dsf', 'psi.dsf', 'report.csv', 'summary.csv', 'manifest.json'):
        assert _bytes(str(first / name)) == _bytes(str(second / name))


def test_replay_gen(tmp_path, gauge_dir):
    assert cli.main(['replay', str(gauge_dir), '--out', str(tmp_path / 'r')]) == cli.EXIT_OK
    assert _bytes(str(tmp_path / 'r' / 'gauge.dsf')) == _bytes(os.path.join(str(gauge_dir), 'gauge.dsf'))


def test_perf(tmp_path):
    out = tmp_path / 'perf'
    assert cli.main(['perf', '--profile', 'u250', '--ii-max', '10', '--out', str(out)]) == cli.EXIT_OK
    for name in ('fig2.csv', 'fig3.csv', 'fig4.csv', 'fig5.csv', 'anchors.csv', 'scenarios.csv', 'manifest.json'):
        assert os.path.isfile(str(out / name))
    assert len(read_csv(str(out / 'fig5.csv'))) == 30
    scenarios = read_csv(str(out / 'scenarios.csv'))
    assert [(r['scenario'], r['precision']) for r in scenarios] == [
        ('embedded', 'single'), ('embedded', 'double'), ('streaming', 'single'), ('streaming', 'double')]
    assert scenarios[2]['initiation_interval'] == '5'
    anchors = {r['anchor']: r for r in read_csv(str(out / 'anchors.csv'))}
    assert anchors['min_ii_double']['flagged'] == 'True'


def test_perf_matches_golden_tables(tmp_path):
    out = tmp_path / 'perf'
    assert cli.main(['perf', '--out', str(out)]) == cli.EXIT_OK
    for name in ('fig2.csv', 'fig3.csv', 'fig4.csv', 'fig5.csv', 'anchors.csv'):
        assert _bytes(str(out / name)) == _bytes(os.path.join(DATA, 'perf_u250', name)), name


def test_perf_audit_fails_on_other_card(tmp_path):
    assert cli.main(['perf', '--profile', 'u280', '--out', str(tmp_path / 'p')]) == cli.EXIT_NOT_CONVERGED


def test_perf_missing_profile(tmp_path):
    assert cli.main(['perf', '--profile', 'nonexistent', '--out', str(tmp_path / 'p')]) == cli.EXIT_IO


def test_bench(tmp_path, gauge_dir, capsys):
    assert cli.main(['bench', '--gauge', str(gauge_dir), '--reps', '3', '--out', str(tmp_path / 'b')]) == cli.EXIT_OK
    printed = dict(kv.split(' = ') for kv in capsys.readouterr().out.strip().split(', '))
    assert int(printed['flops']) == 3 * flop_count(DDAGD, 32).total
    assert printed['dims'] == '4x2x2x2'
    assert os.path.isfile(str(tmp_path / 'b' / 'bench.csv'))


def test_bench_compressed_counts_executed_flops(tmp_path, capsys):
    fname = _gen(tmp_path / 'packed', '--compressed')
    nlinks = len(load(fname).params)
    assert cli.main(['bench', '--gauge', fname, '--reps', '2']) == cli.EXIT_OK
    printed = dict(kv.split(' = ') for kv in capsys.readouterr().out.strip().split(', '))
    assert int(printed['flops']) == 2 * (flop_count(DDAGD, 32).total + 67 * nlinks)
    assert int(printed['flops']) < 2 * flop_count(DDAGD, 32, compressed=True).total


def test_bench_replay_from_another_folder(tmp_path, gauge_dir, monkeypatch):
    monkeypatch.chdir(str(gauge_dir))
    out = tmp_path / 'b'
    assert cli.main(['bench', '--gauge', 'gauge.dsf', '--reps', '1', '--out', str(out)]) == cli.EXIT_OK
    manifest = json.load(open(str(out / 'manifest.json')))
    assert manifest['parameters']['gauge'] == os.path.join(str(gauge_dir), 'gauge.dsf')
    assert manifest['inputs'] == [manifest['parameters']['gauge']]
    monkeypatch.chdir(str(tmp_path))
    assert cli.main(['replay', str(out), '--out', str(tmp_path / 'again')]) == cli.EXIT_OK


def test_missing_gauge(tmp_path):
    assert cli.main(['solve', '--gauge', str(tmp_path / 'nothing.dsf'), '--out', str(tmp_path / 's')]) == cli.EXIT_IO
    os.makedirs(str(tmp_path / 'empty'))
    assert cli.main(['solve', '--gauge', str(tmp_path / 'empty'), '--out', str(tmp_path / 's')]) == cli.EXIT_IO


def test_bad_point_source(tmp_path, gauge_dir):
    code = cli.main(['solve', '--gauge', str(gauge_dir), '--spin', '7', '--out', str(tmp_path / 's')])
    assert code == cli.EXIT_USAGE


@pytest.mark.parametrize('argv', [[], ['gen'], ['gen', '--dims', '2,2,2', '--out', 'x'], ['solve', '--out', 'x'],
                                  ['gen', '--jobs', '0', '--out', 'x'], ['frobnicate']])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as err:
        cli.main(argv)
    assert err.value.code == cli.EXIT_USAGE
