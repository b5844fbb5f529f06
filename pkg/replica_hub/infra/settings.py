import logging
import os
from pathlib import Path

import toml
from dotenv import load_dotenv

from replica_hub.core.exceptions import NoContentError

logger = logging.getLogger(__name__)

ENV_PREFIX = 'REPLICA_HUB_'
PYPROJECT = 'pyproject.toml'
SECTION = 'replica_hub'

DEFAULTS = {
    'log_dir': 'logs',
    'log_level': 'INFO',
    'log_format': '[%(levelname)s] %(asctime)s %(name)s %(message)s',
    'date_format': '%Y-%m-%dT%H:%M:%S',
    'trace_dir': 'traces',
    'scenario_dir': 'data/scenarios',
    'model_dir': 'data/models',
    'default_seed': 0,
    'delay_min': 1,
    'delay_max': 5,
    'max_states': 200000,
    'max_ticks': 100000,
}

INT_KEYS = frozenset({
    'default_seed', 'delay_min', 'delay_max', 'max_states', 'max_ticks',
})


def read_section(path:str = PYPROJECT) -> dict:
    """
    Читает секцию [tool.replica_hub] из pyproject.toml.
    Пустая или отсутствующая секция - NoContentError.
    """
    with open(path, 'r', encoding='utf-8') as source:
        document = toml.load(source)
    section = document.get('tool', {}).get(SECTION, {})
    if not section:
        raise NoContentError(path)
    return section


def env_overrides(keys, env_path:str = '.env') -> dict:
    """ Значения REPLICA_HUB_<KEY> из окружения и файла .env """
    load_dotenv(env_path)
    found = {}
    for name in keys:
        raw = os.getenv(ENV_PREFIX + name.upper())
        if raw is not None:
            found[name] = raw
    return found


class SettingsLoader:
    """
    Настройки хранилища и симулятора, один объект на процесс.
    Порядок: значения по умолчанию, затем pyproject.toml, затем окружение.
    """
    _instance = None
    _initialized = False

    _config = {}

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if type(self)._initialized:
            return
        self.reload()
        type(self)._initialized = True

    def reload(self, path:str = PYPROJECT, env_path:str = '.env'):
        """ Собирает настройки заново из всех источников """
        merged = dict(DEFAULTS)
        try:
            merged.update(read_section(path))
        except FileNotFoundError:
            logger.warning(f'{path} отсутствует, настройки по умолчанию.')
        except NoContentError as e:
            logger.warning(f'{e} Настройки по умолчанию.')
        except toml.TomlDecodeError as e:
            raise RuntimeError(f'{path} не разобран: {e}')
        merged.update(env_overrides(merged, env_path))
        type(self)._config = merged

    def get(self, key: str):
        if not isinstance(key, str):
            raise TypeError(f'Имя настройки - строка, получено {type(key).__name__}')
        name = key.strip()
        if not name:
            raise ValueError('Пустое имя настройки.')
        value = self._config.get(name)
        if value is None or name not in INT_KEYS:
            return value
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ValueError(f"Настройка '{name}' должна быть целым числом: {value!r}")

    def get_scenario_dir(self) -> Path:
        return Path(self.get('scenario_dir'))

    def get_model_dir(self) -> Path:
        return Path(self.get('model_dir'))

    def get_trace_dir(self) -> Path:
        return Path(self.get('trace_dir'))

    def get_delay_range(self) -> tuple[int, int]:
        """ Диапазон задержки сообщений по умолчанию, в тиках """
        return self.get('delay_min'), self.get('delay_max')

    def get_log_info(self) -> dict:
        return {name: self.get(name)
                for name in ('log_level', 'log_format', 'date_format')}


def get_settings() -> SettingsLoader:
    return SettingsLoader()
