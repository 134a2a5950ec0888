import io
import sys
import pathlib
import importlib.util
import json
import math
import dataclasses

import pytest
import numpy as np
import pandas as pd

from rootomo.tomography import campaign, data
from rootomo.tomography.data import CheckSpec
from rootomo.tomography.errors import (AcceptanceCheckFailed, MissingArtifacts, NumericalError,
                                       ConfigError)

SMALL = {
    'name': 'small',
    'state': {'family': 'squeezed_coherent', 'alpha': [0.5, 0.0], 'xi': [0.1, 0.0]},
    'basis': {'s': 2},
    'protocol': {'lo_amplitude': 1.0, 'm': 3, 'system_n_max': 14, 'lo_n_max': 25},
    'n': 300,
    'runs': 3,
    'master_seed': 99,
    'threads': 1,
    'qfunc': {'points': 21},
}

TWO_MODE = {
    'name': 'two_mode',
    'state': {'family': 'two_mode_entangled', 'alpha_a': [0.3, 0.0], 'alpha_b': [0.0, 0.3],
              'k1': 0, 'k2': 1},
    'basis': {'s': [2, 2]},
    'protocol': {'lo_amplitude': 1.0, 'm': 2, 'system_n_max': 10},
    'n': 300,
    'qfunc': {'points': 41},
}


def parse(config):
    return data.parse_config(io.StringIO(json.dumps(config)))


@pytest.fixture(scope='module')
def config():
    return parse(SMALL)


@pytest.fixture(scope='module')
def prepared(config):
    return campaign.prepare_campaign(config)


def test_overrides(config):
    changed = campaign.with_overrides(config, seed=5, runs=7)
    assert (changed.master_seed, changed.runs) == (5, 7)
    assert changed.output == config.output
    assert campaign.with_overrides(config) == config

def test_truncations(config):
    assert campaign.mode_truncations(config)[0].n_max == 14
    explicit = parse(dict(SMALL, state={'family': 'explicit', 'amplitudes': [1.0, [0.0, 1.0]]},
                          basis={'s': 2, 'kind': 'fock'}, protocol={'lo_amplitude': 1.0, 'm': 3}))
    truncations = campaign.mode_truncations(explicit)
    ket = campaign.prepare_state(explicit, truncations)
    assert len(ket) == truncations[0].dim
    np.testing.assert_allclose(ket[:2], [1 / math.sqrt(2), 1j / math.sqrt(2)])

def test_prepared_campaign(prepared):
    assert prepared.truth.s == 2
    assert prepared.model_weight == pytest.approx(1.0, abs=1e-10)
    assert prepared.spectrum.nu == 2
    assert prepared.spectrum.norm_value == pytest.approx(2 * 300 * 3, rel=1e-8)
    assert np.sum(prepared.spectrum.physical) == pytest.approx(2 * 300 * 3, rel=1e-3)
    for p in prepared.p_true_model:
        assert p.sum() == pytest.approx(1.0, abs=1e-8)

def test_analyze(config, tmp_path):
    report = campaign.cmd_analyze(config, tmp_path)
    assert 0.0 < report['e_p'] <= 1.0 + 1e-9
    assert report['config_hash'] == config.hash
    for name in ('config.json', 'spectrum.json', 'loss_curve.csv', 'ideal_loss_curve.csv'):
        assert (tmp_path / name).exists()
    assert data.read_json(tmp_path / 'spectrum.json')['e_p'] == pytest.approx(report['e_p'])

def test_analyze_check(config):
    strict = dataclasses.replace(config, checks=CheckSpec(e_p=0.1, e_p_tolerance=0.01))
    with pytest.raises(AcceptanceCheckFailed):
        campaign.cmd_analyze(strict, check=True)
    report = campaign.cmd_analyze(config)
    loose = dataclasses.replace(config, checks=CheckSpec(e_p=report['e_p'], e_p_tolerance=0.01))
    assert campaign.cmd_analyze(loose, check=True)['e_p'] == report['e_p']

def test_montecarlo(config, tmp_path):
    report = campaign.cmd_montecarlo(config, tmp_path)
    summary = report['summary']
    assert summary['runs'] == 3
    assert summary['failed'] == 0
    assert summary['mean_fidelity'] > 0.95
    assert report['master_seed'] == 99
    assert set(summary['adequacy']) == set(campaign.ADEQUACY_MODES)
    for name in ('fidelity.csv', 'fidelity_histogram.csv', 'summary.json',
                 'runs/counts_00000.csv', 'runs/result_00002.json'):
        assert (tmp_path / name).exists()
    frame = data.read_frame(tmp_path / 'fidelity.csv')
    assert list(frame['run_index']) == [0, 1, 2]
    result = data.read_json(tmp_path / 'runs' / 'result_00001.json')
    assert result['seed'] == {'master_seed': 99, 'run_index': 1}
    assert result['fidelity'] == pytest.approx(frame['fidelity'][1], rel=1e-9)

def test_montecarlo_is_reproducible(config, tmp_path):
    campaign.cmd_montecarlo(config, tmp_path / 'first')
    campaign.cmd_montecarlo(config, tmp_path / 'second')
    for name in ('summary.json', 'fidelity.csv', 'spectrum.json', 'runs/counts_00002.csv'):
        assert (tmp_path / 'first' / name).read_bytes() == (tmp_path / 'second' / name).read_bytes()

def test_report(config, tmp_path):
    campaign.cmd_montecarlo(config, tmp_path)
    report = campaign.cmd_report(tmp_path, check=True, svg=True)
    assert report['summary']['runs'] == 3
    assert (tmp_path / 'loss_histogram.svg').read_text().startswith('<?xml')
    with pytest.raises(MissingArtifacts):
        campaign.cmd_report(tmp_path / 'empty')

def test_check_summary():
    report = {'spectrum': {'e_p': 0.9, 'physical': [100.0, 50.0],
                           'information': {'physical': 150.0}},
              'summary': {'mean_loss': 1e-3, 'rejection_rate': 0.0,
                          'ks': {'statistic': 0.1, 'pvalue': 0.5}}}
    assert campaign.check_summary(report, CheckSpec(e_p=0.9, eigenvalues=[50.0, 100.0],
                                                    information=150.0, mean_loss=1.05e-3,
                                                    ks_pvalue_min=0.01,
                                                    rejection_window=[0.0, 0.1]))
    for checks in (CheckSpec(eigenvalues=[100.0, 40.0]), CheckSpec(mean_loss=2e-3),
                   CheckSpec(ks_pvalue_min=0.9), CheckSpec(rejection_window=[0.02, 0.1])):
        with pytest.raises(AcceptanceCheckFailed):
            campaign.check_summary(report, checks)

def test_failures_abort(config, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise NumericalError("broken run")
    monkeypatch.setattr(campaign, 'run_once', broken)
    with pytest.raises(NumericalError):
        campaign.cmd_montecarlo(config, tmp_path)
    frame = data.read_frame(tmp_path / 'fidelity.csv')
    assert (frame['error'] == 'broken run').all()

def test_any_package_error_becomes_a_failed_row(config, tmp_path, monkeypatch):
    def broken(campaign_, run_index, out_dir):
        if run_index == 1:
            raise ConfigError("bad run")
        return {'run_index': run_index, 'error': ''}
    monkeypatch.setattr(campaign, 'run_once', broken)
    rows = campaign.run_all(None, 3)
    assert [row['error'] for row in rows] == ['', 'bad run', '']
    with pytest.raises(NumericalError):
        campaign.cmd_montecarlo(config, tmp_path)

def load_script():
    path = pathlib.Path(__file__).resolve().parents[2] / 'scripts' / 'tomography.py'
    spec = importlib.util.spec_from_file_location('tomography_script', path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module

@pytest.mark.parametrize('flags, expected', [
    (['--svg'], [{'check': False, 'svg': True}]),
    (['--check'], [{'check': True, 'svg': False}]),
    ([], []),
])
def test_montecarlo_command_line_report(tmp_path, monkeypatch, flags, expected):
    script = load_script()
    reports = []
    monkeypatch.setattr(script.campaign, 'cmd_montecarlo', lambda config, out=None: None)
    monkeypatch.setattr(script.campaign, 'cmd_report',
                        lambda out, check=False, svg=False: reports.append(
                            {'check': check, 'svg': svg}))
    path = tmp_path / 'small.json'
    path.write_text(json.dumps(SMALL))
    monkeypatch.setattr(sys, 'argv', ['tomography.py', 'montecarlo', '--config', str(path),
                                      '--out', str(tmp_path / 'out')] + flags)
    script.main()
    assert reports == expected

def test_simulate_and_reconstruct(config, tmp_path):
    path = campaign.cmd_simulate(config, 1, tmp_path)
    assert data.read_count_header(path)['run_index'] == '1'
    payload = campaign.cmd_reconstruct(config, path, tmp_path)
    assert payload['fidelity'] > 0.95
    assert (tmp_path / 'counts_00001_result.json').exists()

def test_qfunc_single_mode(config, tmp_path):
    paths = campaign.cmd_qfunc(config, tmp_path)
    frame = pd.read_csv(paths[0])
    assert list(frame.columns) == ['re_beta', 'im_beta', 'q']
    assert len(frame) == 21 * 21
    assert frame['q'].max() <= 1.0 / math.pi + 1e-12
    assert frame['re_beta'].min() == pytest.approx(-3.5)
    assert frame['im_beta'].max() == pytest.approx(3.5)

def test_qfunc_two_modes(tmp_path):
    config = parse(TWO_MODE)
    paths = campaign.cmd_qfunc(config, tmp_path)
    assert [path.name for path in paths] == ['qfunc_a.csv', 'qfunc_b.csv', 'wavefunction.csv']
    frame = pd.read_csv(paths[2])
    x = np.unique(frame['x_a'])
    assert frame['density'].sum() * (x[1] - x[0]) ** 2 == pytest.approx(1.0, abs=1e-3)


@pytest.mark.slow
def test_worker_count_does_not_change_results(config, tmp_path):
    campaign.cmd_montecarlo(config, tmp_path / 'one')
    campaign.cmd_montecarlo(dataclasses.replace(config, threads=2), tmp_path / 'two')
    assert ((tmp_path / 'one' / 'fidelity.csv').read_bytes()
            == (tmp_path / 'two' / 'fidelity.csv').read_bytes())
