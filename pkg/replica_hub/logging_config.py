import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

from replica_hub.infra.settings import get_settings

SIM_LOGGER = 'replica_hub.sim'
MAX_LOG_BYTES = 5 * 1024 * 1024
LOG_BACKUPS = 10


def _rotating(path:Path, formatter:logging.Formatter) -> RotatingFileHandler:
    handler = RotatingFileHandler(path, maxBytes=MAX_LOG_BYTES,
                                  backupCount=LOG_BACKUPS, encoding='utf-8')
    handler.setFormatter(formatter)
    return handler


def setup_logging(level=None):
    """
    Два журнала в log_dir: actions.log для хранилища, проверки и CLI,
    sim.log для событий симулятора (логгер replica_hub.sim).
    Повторный вызов не добавляет обработчики.
    """
    settings = get_settings()
    info = settings.get_log_info()
    if level is None:
        level = getattr(logging, str(info['log_level']).upper(), logging.INFO)

    directory = Path(settings.get('log_dir'))
    directory.mkdir(parents=True, exist_ok=True)
    formatter = logging.Formatter(fmt=info['log_format'],
                                  datefmt=info['date_format'])

    root = logging.getLogger()
    if not any(isinstance(h, RotatingFileHandler) for h in root.handlers):
        root.addHandler(_rotating(directory / 'actions.log', formatter))
        root.setLevel(level)

    sim = logging.getLogger(SIM_LOGGER)
    if not sim.handlers:
        sim.addHandler(_rotating(directory / 'sim.log', formatter))
        sim.setLevel(level)
        sim.propagate = False
