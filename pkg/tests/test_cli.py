import json

import pandas as pd
import pytest

from fraclat import cli, settings
from fraclat.cli import build_parser, main
from fraclat.database import RunRecord, init_db

LATTICE = """
[run]
seed = 3

[lattice]
kernel = nearest
n_sites = 16
dx = 0.5
g = -1
dt = 0.01
steps = 20
initial = random:0.1
snapshot_every = 10
track_modes = 1
"""


@pytest.fixture(autouse=True)
def quiet_environment(monkeypatch):
    monkeypatch.setattr(settings, 'LOG_DIR', '')
    monkeypatch.setattr(settings, 'DATABASE_URL', '')


def _json(path):
    return json.loads(path.read_text(encoding='utf-8'))


def test_classify_shortcut(tmp_path):
    status = main(['classify', '--kernel', 'powerlaw:s=0.5', '--output', str(tmp_path)])
    assert status == 0
    report = _json(tmp_path / 'classify.json')
    assert report['alpha'] == pytest.approx(0.5, abs=0.01)
    assert report['verdict'] == 'AlphaInteraction'
    assert report['kernel'] == 'powerlaw:s=0.5'
    assert report['crossover_k0'] == pytest.approx(8.35, abs=0.05)
    assert report['artifact_version'] == settings.ARTIFACT_VERSION


def test_kernel_spectrum(tmp_path, write_config):
    path = write_config('[spectrum]\nkernel = altinvsq\nk_min = 0\nk_max = 3\npoints = 7\npartial_sum_terms = 1000\n')
    assert main(['kernel-spectrum', '--config', str(path), '--output', str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / 'spectrum.csv')
    assert list(frame.columns) == ['k', 'spectrum', 'gap', 'partial_sum', 'tail_bound']
    assert (frame['gap'] - 0.5 * frame['k'] ** 2).abs().max() < 1e-12
    assert ((frame['partial_sum'] - frame['spectrum']).abs() <= frame['tail_bound'] + 1e-12).all()
    sidecar = _json(tmp_path / 'spectrum.csv.meta.json')
    assert sidecar['rows'] == 7 and sidecar['command'] == 'kernel-spectrum'


def test_lattice_run_is_reproducible(tmp_path, write_config):
    path = write_config(LATTICE)
    first, second = tmp_path / 'a', tmp_path / 'b'
    assert main(['run', '--config', str(path), '--output', str(first)]) == 0
    assert main(['lattice-run', '--config', str(path), '--output', str(second)]) == 0
    for name in ('lattice_snapshots.csv', 'lattice_snapshots.csv.meta.json', 'lattice_summary.json'):
        assert (first / name).read_bytes() == (second / name).read_bytes()

    frame = pd.read_csv(first / 'lattice_snapshots.csv')
    assert list(frame.columns) == ['t', 'site_index', 'u', 'v']
    assert len(frame) == 3 * 16
    summary = _json(first / 'lattice_summary.json')
    assert summary['stability_bound'] == pytest.approx(1.0)
    assert summary['energy_drift'] < 1e-3


def test_seed_override_changes_initial_state(tmp_path, write_config):
    path = write_config(LATTICE)
    main(['run', '--config', str(path), '--output', str(tmp_path / 'a')])
    main(['run', '--config', str(path), '--output', str(tmp_path / 'b'), '--seed', '4'])
    a = pd.read_csv(tmp_path / 'a' / 'lattice_snapshots.csv')
    b = pd.read_csv(tmp_path / 'b' / 'lattice_snapshots.csv')
    assert not a['u'].equals(b['u'])


def test_instability_exit_code(tmp_path, write_config):
    path = write_config(LATTICE.replace('dt = 0.01', 'dt = 3').replace('steps = 20', 'steps = 2000')
                        .replace('initial = random:0.1', 'initial = random:1e-3'))
    assert main(['run', '--config', str(path), '--output', str(tmp_path)]) == 2
    assert not (tmp_path / 'lattice_snapshots.csv').exists()


def test_configuration_errors_exit_with_one(tmp_path, write_config):
    bad = write_config(LATTICE.replace('n_sites = 16', 'n_sites = 15'), name='bad.cfg')
    assert main(['run', '--config', str(bad), '--output', str(tmp_path)]) == 1
    good = write_config(LATTICE)
    assert main(['classify', '--config', str(good), '--output', str(tmp_path)]) == 1
    assert main(['run', '--config', str(tmp_path / 'missing.cfg')]) == 1
    assert main(['lattice-run', '--kernel', 'nearest']) == 1


def test_pde_run(tmp_path, write_config):
    path = write_config('[pde]\nfamily = kdv\ng1 = -6\ng3 = 1\nn = 64\nlength = 20\ndt = 1e-3\n'
                        'steps = 20\ninitial = soliton:2,10\nsnapshot_every = 10\nwrite_spectrum = true\n')
    assert main(['pde-run', '--config', str(path), '--output', str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / 'pde_snapshots.csv')
    assert list(frame.columns) == ['t', 'x', 're_u', 'im_u']
    assert len(frame) == 3 * 64
    assert (tmp_path / 'pde_spectrum.csv').exists()
    summary = _json(tmp_path / 'pde_summary.json')
    assert summary['family'] == 'KdV' and summary['time_order'] == 1
    assert summary['final_time'] == pytest.approx(0.02)


def test_compare_dispersion(tmp_path, write_config):
    path = write_config('[dispersion]\nkernel = nearest\nn_sites = 16\ndx = 0.1\ng = -1\npoints = 8\n')
    assert main(['compare-dispersion', '--config', str(path), '--output', str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / 'dispersion.csv')
    assert len(frame) == 8
    report = _json(tmp_path / 'dispersion_report.json')
    assert report['norm_label'] == 'max_relative'
    assert report['error_norm'] <= 0.06


def test_compare_evolution(tmp_path, write_config):
    path = write_config('[evolution]\nkernel = nearest\nn_sites = 16\ndx = 0.39269908169872414\ng = -1\n'
                        'initial = mode:1,1\nt_final = 0.5\n')
    assert main(['compare-evolution', '--config', str(path), '--output', str(tmp_path)]) == 0
    levels = pd.read_csv(tmp_path / 'evolution_levels.csv')
    assert list(levels['n_sites']) == [16, 32, 64]
    report = _json(tmp_path / 'evolution_report.json')
    assert len(report['convergence_orders']) == 2
    assert (tmp_path / 'evolution_fields.csv.meta.json').exists()


def test_divergence(tmp_path, write_config):
    path = write_config('[divergence]\nalpha = 0.5\ng_alpha = 1\ndx_list = 0.1, 0.03, 0.01, 0.003, 0.001\n')
    assert main(['divergence', '--config', str(path), '--output', str(tmp_path)]) == 0
    report = _json(tmp_path / 'divergence.json')
    assert report['slope'] == pytest.approx(-0.5, abs=1e-10)
    frame = pd.read_csv(tmp_path / 'divergence.csv')
    assert (frame['invariant_term'] == 0).all()


def test_runs_are_recorded(tmp_path, write_config, monkeypatch):
    url = f'sqlite:///{tmp_path / "runs.db"}'
    monkeypatch.setattr(settings, 'DATABASE_URL', url)
    path = write_config(LATTICE)
    assert main(['run', '--config', str(path), '--output', str(tmp_path / 'out')]) == 0
    session = init_db(url)
    try:
        records = session.query(RunRecord).all()
        assert len(records) == 1
        assert records[0].command == 'lattice-run' and records[0].exit_status == 0
        assert len(records[0].config_sha256) == 64
    finally:
        session.close()


@pytest.mark.parametrize('kernel, verdict, crossover', [
    # sinc²(k/2) 偏离 1 达 5% 处
    ('nearest', 'AlphaInteraction', 0.776),
    # (sinc(k/2))^1.5 偏离 1 达 5% 处
    ('gruenwald:alpha=1.5', 'AlphaInteraction', 0.902),
    ('powerlaw:s=2', 'LogDivergent', None),
])
def test_classify_reports_crossover_for_every_kernel(tmp_path, kernel, verdict, crossover):
    assert main(['classify', '--kernel', kernel, '--output', str(tmp_path)]) == 0
    report = _json(tmp_path / 'classify.json')
    assert report['verdict'] == verdict
    if crossover is None:
        assert report['crossover_k0'] is None
    else:
        assert report['crossover_k0'] == pytest.approx(crossover, abs=0.01)


def test_unexpected_error_exits_with_one_and_is_recorded(tmp_path, write_config, monkeypatch):
    def broken(config, out):
        raise RuntimeError('boom')

    url = f'sqlite:///{tmp_path / "runs.db"}'
    monkeypatch.setattr(settings, 'DATABASE_URL', url)
    monkeypatch.setitem(cli.HANDLERS, 'lattice-run', broken)
    path = write_config(LATTICE)
    assert main(['run', '--config', str(path), '--output', str(tmp_path / 'out')]) == 1
    session = init_db(url)
    try:
        records = session.query(RunRecord).all()
        assert [r.exit_status for r in records] == [1]
    finally:
        session.close()


def test_parser_lists_commands():
    parser = build_parser()
    args = parser.parse_args(['divergence', '--config', 'x.cfg', '--threads', '2'])
    assert args.command == 'divergence' and args.threads == 2
    with pytest.raises(SystemExit):
        parser.parse_args(['plot'])
