import os.path as osp
import sys

import run_scenario


SCENARIOS = osp.join(osp.dirname(osp.dirname(osp.abspath(__file__))), 'scenarios')
WER = osp.join(SCENARIOS, 'write_erase_retrieve.yaml')


def cli(monkeypatch, *args):
    monkeypatch.setattr(sys, 'argv', ['run_scenario.py'] + list(args))
    return run_scenario.main()


def test_run_verify_analyze(monkeypatch, tmp_path, capsys):
    out = str(tmp_path / 'wer')
    assert cli(monkeypatch, 'run', WER, '-o', out, '-q') == 0
    assert cli(monkeypatch, 'verify', out) == 0
    assert 'PASS' in capsys.readouterr().out
    assert cli(monkeypatch, 'analyze', out, '-k', 'classify') == 0
    assert cli(monkeypatch, 'analyze', out, '-k', 'astrology') == 2


def test_verify_detects_tampering(monkeypatch, tmp_path, capsys):
    out = str(tmp_path / 'wer')
    assert cli(monkeypatch, 'run', WER, '-o', out, '-q') == 0
    with open(osp.join(out, 'snapshots', 'scan_001.txt')) as f:
        written = f.read()
    with open(osp.join(out, 'snapshots', 'scan_004.txt'), 'w') as f:
        f.write(written)
    assert cli(monkeypatch, 'verify', out) == 1
    assert 'FAIL' in capsys.readouterr().out


def test_invalid_scenario_exit_code(monkeypatch, tmp_path):
    path = tmp_path / 'bad.yaml'
    path.write_text('name: bad\nschedule: {scans: 1}\n')
    assert cli(monkeypatch, 'run', str(path), '-o', str(tmp_path / 'out'), '-q') == 2
    assert not (tmp_path / 'out').exists()


def test_several_scenarios_get_subdirectories(monkeypatch, tmp_path):
    other = tmp_path / 'still.yaml'
    other.write_text('name: still\nseed: 0\nschedule: {scans: 1}\n')
    assert cli(monkeypatch, 'run', WER, str(other), '-o', str(tmp_path), '-q') == 0
    assert (tmp_path / 'write_erase_retrieve' / 'report.json').exists()
    assert (tmp_path / 'still' / 'report.json').exists()


def test_no_command(monkeypatch):
    assert cli(monkeypatch) == 1
