import json

import pytest

from conftest import MODEL_DIR, SCENARIO_DIR
from replica_hub.cli.interface import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_TOO_LARGE,
    EXIT_USAGE,
)
from replica_hub.core.exceptions import TypeMismatchError
from replica_hub.core.store import Replica
from replica_hub.infra.settings import get_settings


def test_run_scenario(run_cli, tmp_path):
    trace = tmp_path / 'password.jsonl'
    status, output = run_cli('run', str(SCENARIO_DIR / 'password.json'),
                             '--trace', str(trace))
    assert status == EXIT_OK
    assert 'Итог: OK' in output
    lines = trace.read_text(encoding='utf-8').splitlines()
    assert lines and all(json.loads(line)['cat'] for line in lines)


def test_run_json_summary(run_cli, tmp_path):
    status, output = run_cli('run', str(SCENARIO_DIR / 'duplicate-delivery.json'),
                             '--process-mode', 'cp', '--json',
                             '--trace', str(tmp_path / 'cp.jsonl'))
    assert status == EXIT_OK
    summary = json.loads(output)
    assert summary['passed'] is True
    assert summary['converged'] is True


def test_ablation_fails_some_seed(run_cli, tmp_path):
    statuses = {
        run_cli('run', str(SCENARIO_DIR / 'password.json'),
                '--ablate', 'no-causal-deps', '--seed', str(seed),
                '--trace', str(tmp_path / f'{seed}.jsonl'))[0]
        for seed in range(20)
    }
    assert EXIT_FAILED in statuses
    assert statuses <= {EXIT_OK, EXIT_FAILED}


@pytest.mark.parametrize('argv', [
    ['run', '/nonexistent/scenario.json'],
    ['run', 'password.json', '--ablate', 'no-gravity'],
    ['run', 'password.json', '--process-mode', 'eventual'],
    ['check', '/nonexistent/model.toml'],
    ['demo', 'tetris'],
    ['fuzz', '--runs', '0'],
    [],
])
def test_usage_errors(run_cli, argv):
    status, _ = run_cli(*argv)
    assert status == EXIT_USAGE


def test_bad_scenario_file(run_cli, tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text('{"replicas": 2, "steps": [', encoding='utf-8')
    status, output = run_cli('run', str(path))
    assert status == EXIT_USAGE
    assert 'Ошибка формата сценария' in output


@pytest.mark.parametrize('name, expected', [
    ('fmke', EXIT_FAILED),
    ('fmke-sync', EXIT_OK),
    ('fmke-no-duplicates-dropped', EXIT_OK),
    ('bank', EXIT_FAILED),
    ('escrow', EXIT_OK),
    ('password', EXIT_OK),
])
def test_check_models(run_cli, name, expected):
    status, output = run_cli('check', str(MODEL_DIR / f'{name}.toml'))
    assert status == expected
    assert "Модель '" in output


def test_check_strict_and_json(run_cli):
    path = str(MODEL_DIR / 'fmke-no-duplicates-dropped.toml')
    status, output = run_cli('check', path, '--strict', '--json')
    assert status == EXIT_FAILED
    report = json.loads(output)
    assert report['strict'] is True
    assert report['checks']['stability']['verdict'] == 'fail'


def test_check_malformed_model(run_cli, tmp_path):
    path = tmp_path / 'broken.toml'
    path.write_text('[vars]\nx = { range = [3, 1] }\n', encoding='utf-8')
    status, output = run_cli('check', str(path))
    assert status == EXIT_USAGE
    assert 'Ошибка' in output


def test_check_state_space_limit(run_cli, monkeypatch):
    monkeypatch.setitem(get_settings()._config, 'max_states', 10)
    status, output = run_cli('check', str(MODEL_DIR / 'fmke.toml'))
    assert status == EXIT_TOO_LARGE
    assert 'Ошибка' in output


@pytest.mark.parametrize('name', ['duplicate-delivery', 'budget-escrow',
                                  'buggydb2'])
def test_demo(run_cli, tmp_path, name):
    status, output = run_cli('demo', name, '--trace', str(tmp_path / name))
    assert status == EXIT_OK
    assert output.startswith(f'=== {name}')
    assert list(tmp_path.iterdir())


def test_demo_annotations(run_cli):
    status, output = run_cli('demo', 'duplicate-delivery')
    assert status == EXIT_OK
    assert 'разбиение сети' in output
    assert 'НАРУШЕНИЕ' in output
    assert 'БЛОКИРОВКА' in output


def test_fuzz(run_cli):
    status, output = run_cli('fuzz', '--runs', '3', '--seed', '40')
    assert status == EXIT_OK
    assert output.strip().endswith('Сценариев: 3, с ошибками: 0')


def test_store_fault_during_run_is_a_failure(run_cli, monkeypatch, tmp_path):
    def broken(self, record):
        raise TypeMismatchError('set', 'counter')

    monkeypatch.setattr(Replica, 'receive', broken)
    status, output = run_cli('run', str(SCENARIO_DIR / 'password.json'),
                             '--trace', str(tmp_path / 'fault.jsonl'))
    assert status == EXIT_FAILED
    assert 'сбой при обработке события deliver' in output
