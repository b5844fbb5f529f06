"""
Модуль содержит разбор описаний моделей (словарь из TOML-файла
или из кода) в AppModel.

Формат:
    name = "fmke"
    description = "..."
    [vars]
    count = { range = [0, 3] }
    tags = { subsets-of = ["a", "b"] }
    mode = { values = ["on", "off"] }
    [invariants]
    no-duplicates = "count >= 0"
    [[ops]]
    name = "process-prescription"
    params = { n = { range = [1, 2] } }
    pre = "count >= n"
    effects = [ { kind = "add", var = "count", value = "-n" } ]
    sync = [["process-prescription", "process-prescription"]]
    ordered = [["create-prescription", "*"]]
"""

from pathlib import Path

from replica_hub.checker.expressions import compile_expression
from replica_hub.checker.model import (
    WILDCARD,
    AppModel,
    Domain,
    EffectSpec,
    OpSpec,
    Variable,
)
from replica_hub.core.exceptions import ExpressionError, ModelFormatError
from replica_hub.infra.storage import read_toml


def parse_domain(raw, where: str) -> Domain:
    """
    Выбрасывает:
        ModelFormatError
    """
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ModelFormatError(
            f'{where}: домен задаётся одним ключом range | values | subsets-of'
        )
    (kind, value), = raw.items()
    match kind:
        case 'range':
            if not isinstance(value, list) or len(value) != 2:
                raise ModelFormatError(f'{where}: range = [lo, hi]')
            return Domain.int_range(*value)
        case 'values':
            return Domain.of_values(value)
        case 'subsets-of':
            return Domain.subsets_of(value)
    raise ModelFormatError(f"{where}: неизвестный вид домена '{kind}'")


def _expression(raw, where: str):
    try:
        return compile_expression(raw)
    except ExpressionError as e:
        raise ModelFormatError(f'{where}: {e}')


def _pairs(raw, where: str) -> list[tuple[str, str]]:
    if not isinstance(raw, list):
        raise ModelFormatError(f'{where}: ожидался список пар')
    pairs = []
    for item in raw:
        if not isinstance(item, list) or len(item) != 2 \
                or not all(isinstance(name, str) for name in item):
            raise ModelFormatError(f'{where}: пара должна быть [a, b]: {item}')
        pairs.append(tuple(item))
    return pairs


def _parse_op(raw: dict, index: int) -> OpSpec:
    if not isinstance(raw, dict) or not raw.get('name'):
        raise ModelFormatError(f'ops[{index}]: нет имени операции')
    name = raw['name']
    unknown = set(raw) - {'name', 'params', 'pre', 'effects'}
    if unknown:
        raise ModelFormatError(f"операция '{name}': лишние поля {sorted(unknown)}")
    params = tuple(
        (param, parse_domain(domain, f"{name}.params.{param}"))
        for param, domain in raw.get('params', {}).items()
    )
    pre = raw.get('pre')
    effects = []
    for effect in raw.get('effects', []):
        if not isinstance(effect, dict) \
                or not {'kind', 'var', 'value'} <= set(effect):
            raise ModelFormatError(
                f"операция '{name}': эффект задаётся полями kind, var, value"
            )
        effects.append(EffectSpec(
            effect['kind'], effect['var'],
            _expression(effect['value'], f'{name}.effects')
        ))
    return OpSpec(
        name, params,
        _expression(pre, f'{name}.pre') if pre is not None else None,
        tuple(effects)
    )


def model_from_dict(data: dict, source: str | None = None) -> AppModel:
    """
    Строит модель из словаря.

    Выбрасывает:
        ModelFormatError - структура описания некорректна
    """
    if not isinstance(data, dict):
        raise ModelFormatError('описание модели должно быть таблицей', source)
    try:
        name = data.get('name') or (Path(source).stem if source else 'model')
        raw_vars = data.get('vars')
        if not isinstance(raw_vars, dict) or not raw_vars:
            raise ModelFormatError('нет таблицы vars')
        variables = tuple(
            Variable(var, parse_domain(domain, f'vars.{var}'))
            for var, domain in raw_vars.items()
        )
        invariants = tuple(
            (inv, _expression(text, f'invariants.{inv}'))
            for inv, text in data.get('invariants', {}).items()
        )
        operations = tuple(
            _parse_op(op, index) for index, op in enumerate(data.get('ops', []))
        )
        op_names = [op.name for op in operations]
        sync_pairs = frozenset(
            frozenset(pair) for pair in _pairs(data.get('sync', []), 'sync')
        )
        ordered = set()
        for first, second in _pairs(data.get('ordered', []), 'ordered'):
            for a in (op_names if first == WILDCARD else [first]):
                for b in (op_names if second == WILDCARD else [second]):
                    ordered.add((a, b))
        return AppModel(
            name=name,
            variables=variables,
            invariants=invariants,
            operations=operations,
            sync_pairs=sync_pairs,
            ordered=frozenset(ordered),
            description=data.get('description', ''),
        )
    except ModelFormatError as e:
        if e.source is None and source is not None:
            raise ModelFormatError(e.reason, source)
        raise
    except (AttributeError, TypeError) as e:
        raise ModelFormatError(f'некорректная структура: {e}', source)


def load_model(path) -> AppModel:
    """
    Загружает модель из TOML-файла.

    Выбрасывает:
        ModelFormatError, FileNotFoundError
    """
    return model_from_dict(read_toml(Path(path)), source=str(path))
