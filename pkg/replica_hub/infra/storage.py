import json
import tempfile
from pathlib import Path

import toml

from replica_hub.core.exceptions import ModelFormatError, ScenarioFormatError
from replica_hub.infra.settings import get_settings


def read_json(filepath: Path):
    """
    Загружает JSON-файл сценария.

    Выбрасывает:
        FileNotFoundError - файла нет
        ScenarioFormatError - файл не является корректным JSON
    """
    filepath = Path(filepath)
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(f'некорректный JSON: {e}', str(filepath))


def read_toml(filepath: Path):
    """
    Загружает TOML-файл модели.

    Выбрасывает:
        FileNotFoundError - файла нет
        ModelFormatError - файл не является корректным TOML
    """
    filepath = Path(filepath)
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            return toml.load(f)
    except toml.TomlDecodeError as e:
        raise ModelFormatError(f'некорректный TOML: {e}', str(filepath))


def resolve(name_or_path, directory: Path, suffix: str) -> Path:
    """
    Путь к файлу: как задан, либо <directory>/<name><suffix>,
    если передано только имя из корпуса.
    """
    path = Path(name_or_path)
    if path.exists() or path.suffix:
        return path
    return Path(directory) / f'{name_or_path}{suffix}'


class TraceStorage:
    """
    Класс для записи трасс прогонов.
    Трасса - строки канонического JSON, по одному событию в строке.
    """
    def __init__(self, directory: Path | None = None):
        self.directory = Path(directory or get_settings().get_trace_dir())

    def path_for(self, name: str, seed: int) -> Path:
        return self.directory / f'{name}-seed{seed}.jsonl'

    def save(self, lines: list[str], filepath: Path | None = None,
             name: str = 'run', seed: int = 0) -> Path:
        filepath = Path(filepath) if filepath else self.path_for(name, seed)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        self._atomic_write(filepath, ''.join(line + '\n' for line in lines))
        return filepath

    def _atomic_write(self, filepath: Path, text: str):
        """
        Атомарная запись: файл либо полностью обновлён,
        либо не изменён вообще.
        """
        with tempfile.NamedTemporaryFile(
            mode='w', encoding='utf-8', delete=False, dir=filepath.parent,
            newline='\n'
        ) as tmp:
            tmp.write(text)
            tmp_path = Path(tmp.name)
        tmp_path.replace(filepath)
