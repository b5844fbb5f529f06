import logging

import pytest

from replica_hub.core.exceptions import NoContentError
from replica_hub.decorators import format_log, log_action
from replica_hub.infra.settings import (
    DEFAULTS,
    env_overrides,
    get_settings,
    read_section,
)


def test_read_section(tmp_path):
    path = tmp_path / 'pyproject.toml'
    path.write_text('[tool.replica_hub]\nmax_states = 7\n', encoding='utf-8')
    assert read_section(str(path)) == {'max_states': 7}


def test_read_empty_section(tmp_path):
    path = tmp_path / 'pyproject.toml'
    path.write_text('[tool.poetry]\nname = "x"\n', encoding='utf-8')
    with pytest.raises(NoContentError):
        read_section(str(path))


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv('REPLICA_HUB_MAX_TICKS', '42')
    monkeypatch.setenv('REPLICA_HUB_TRACE_DIR', 'placeholder')
    monkeypatch.delenv('REPLICA_HUB_TRACE_DIR')
    env_file = tmp_path / '.env'
    env_file.write_text('REPLICA_HUB_TRACE_DIR=elsewhere\n', encoding='utf-8')

    found = env_overrides(DEFAULTS, str(env_file))
    assert found == {'max_ticks': '42', 'trace_dir': 'elsewhere'}


def test_settings_get(monkeypatch):
    settings = get_settings()
    assert settings is get_settings()
    monkeypatch.setitem(settings._config, 'max_states', '12')
    assert settings.get(' max_states ') == 12
    monkeypatch.setitem(settings._config, 'max_states', 'many')
    with pytest.raises(ValueError):
        settings.get('max_states')
    with pytest.raises(ValueError):
        settings.get('  ')
    with pytest.raises(TypeError):
        settings.get(3)


def test_format_log():
    assert format_log('COMMIT', 0, 't1', 'map:p1') == \
        "COMMIT replica=0 txn='t1' key='map:p1' result='OK'"
    assert format_log('TRANSFER', 2, amount=3, verbose={'to': 1}) == \
        "TRANSFER replica=2 amount=3 result='OK' to: 1"
    assert format_log('ABORT', result='ERROR', error_type='X',
                      error_message='boom') == \
        "ABORT result='ERROR' error_type='X' error_message='boom'"


class Owner:
    id = 4
    applied = 'v1'

    @log_action('TRANSFER', verbose=True)
    def move(self, target, amount):
        if amount < 0:
            raise ValueError('отрицательное количество')
        self.applied = 'v2'
        return amount


def test_log_action(caplog):
    caplog.set_level(logging.INFO, logger='replica_hub.decorators')
    assert Owner().move(1, amount=2) == 2
    with pytest.raises(ValueError):
        Owner().move(1, amount=-1)

    ok, error = [r.getMessage() for r in caplog.records]
    assert ok.startswith("TRANSFER replica=4 amount=2 result='OK'")
    assert 'applied_before: v1' in ok and 'applied_after: v2' in ok
    assert "error_type='ValueError'" in error
