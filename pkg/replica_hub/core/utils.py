# Модуль для вспомогательных функций: каноническое текстовое кодирование

import json


def to_plain(obj):
    """
    Приводит объект к JSON-совместимому виду со стабильным порядком.

    Правила:
        - объекты с методом to_dict() кодируются через него;
        - множества сортируются по каноническому представлению элементов;
        - ключи словарей приводятся к строкам.
    """
    if hasattr(obj, 'to_dict'):
        return to_plain(obj.to_dict())
    if isinstance(obj, dict):
        return {_key(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        items = [to_plain(item) for item in obj]
        return sorted(items, key=canonical)
    if isinstance(obj, (list, tuple)):
        return [to_plain(item) for item in obj]
    return obj


def _key(key) -> str:
    if isinstance(key, str):
        return key
    return canonical(key)


def canonical(obj) -> str:
    """ Каноническая строка объекта (для трасс и golden-тестов) """
    return json.dumps(
        to_plain(obj),
        sort_keys=True,
        separators=(',', ':'),
        ensure_ascii=False
    )
