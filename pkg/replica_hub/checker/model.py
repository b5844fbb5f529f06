"""
Модуль содержит декларативную модель приложения для ограниченной проверки:
переменные с конечными доменами, именованные инварианты, операции
(параметры, предусловие, эффект) и объявления синхронизации.

Эффект операции строится только из коммутирующих примитивов
    add         - прибавление к счетчику
    insert      - добавление в add-wins множество
    remove      - удаление из add-wins множества (только наблюдаемых меток)
    assign-lww  - присваивание с меткой времени
и единственного некоммутирующего
    assign      - «сырое» присваивание, только для мутационных моделей.

Эффект вычисляется в состоянии источника (prepare) и применяется
в любом состоянии (apply_effector), даже если предусловие там ложно.
"""

import itertools
from dataclasses import dataclass, field, replace
from typing import Any

from replica_hub.checker.expressions import Expression
from replica_hub.core.exceptions import ModelFormatError

EFFECT_KINDS = ('add', 'insert', 'remove', 'assign-lww', 'assign')
WILDCARD = '*'

INITIAL_TS = (0, 0)


@dataclass(frozen=True)
class Domain:
    """ Конечный домен: range (целые lo..hi), values, subsets (подмножества) """
    kind: str
    values: tuple

    @classmethod
    def int_range(cls, low: int, high: int) -> 'Domain':
        if not isinstance(low, int) or not isinstance(high, int) or low > high:
            raise ModelFormatError(f'некорректный диапазон [{low}, {high}]')
        return cls('range', tuple(range(low, high + 1)))

    @classmethod
    def of_values(cls, values) -> 'Domain':
        values = tuple(values)
        if not values or len(set(values)) != len(values):
            raise ModelFormatError(
                f'список значений пуст или содержит повторы: {list(values)}'
            )
        return cls('values', values)

    @classmethod
    def subsets_of(cls, elements) -> 'Domain':
        elements = tuple(elements)
        if len(set(elements)) != len(elements):
            raise ModelFormatError(f'повторы в элементах {list(elements)}')
        subsets = tuple(
            frozenset(combo)
            for size in range(len(elements) + 1)
            for combo in itertools.combinations(elements, size)
        )
        return cls('subsets', subsets)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def index(self, value) -> int:
        return self.values.index(value)

    def describe(self) -> str:
        match self.kind:
            case 'range':
                return f'{self.values[0]}..{self.values[-1]}'
            case 'subsets':
                return f'подмножества {sorted(self.values[-1])}'
            case _:
                return '{' + ', '.join(map(repr, self.values)) + '}'


@dataclass(frozen=True)
class EffectSpec:
    """ Примитив эффекта: kind над переменной var, значение - выражение """
    kind: str
    var: str
    value: Expression


@dataclass(frozen=True)
class Effector:
    """ Эффект, подготовленный в состоянии источника """
    kind: str
    var: str
    value: Any
    tag: Any = None


@dataclass(frozen=True)
class OpInstance:
    """ Операция с конкретными значениями параметров """
    name: str
    args: tuple[tuple[str, Any], ...] = ()

    @property
    def params(self) -> dict:
        return dict(self.args)

    def to_dict(self):
        return {'name': self.name, 'params': _plain_params(self.args)}

    def __str__(self):
        inner = ', '.join(f'{name}={_show(value)}' for name, value in self.args)
        return f'{self.name}({inner})'


@dataclass(frozen=True)
class OpSpec:
    """
    Описание операции модели.

    Атрибуты:
        name - имя операции
        params - (имя, домен) параметров
        pre - предусловие (None - всегда истинно)
        effects - примитивы эффекта в порядке применения
    """
    name: str
    params: tuple[tuple[str, Domain], ...] = ()
    pre: Expression | None = None
    effects: tuple[EffectSpec, ...] = ()

    def instances(self) -> list[OpInstance]:
        names = [name for name, _ in self.params]
        return [
            OpInstance(self.name, tuple(zip(names, combo)))
            for combo in itertools.product(*(domain for _, domain in self.params))
        ]

    def enabled(self, state: dict, instance: OpInstance) -> bool:
        if self.pre is None:
            return True
        return bool(self.pre.evaluate({**state, **instance.params}))


@dataclass(frozen=True)
class Variable:
    name: str
    domain: Domain


@dataclass(frozen=True)
class AppModel:
    """
    Модель приложения.

    Атрибуты:
        name - имя модели
        variables - переменные состояния в порядке перечисления
        invariants - (имя, предикат) инвариантов
        operations - операции
        sync_pairs - неупорядоченные пары синхронизированных операций
        ordered - пары (a, b): a всегда причинно раньше b,
                  такие операции не бывают конкурентными
        description - описание
    """
    name: str
    variables: tuple[Variable, ...]
    invariants: tuple[tuple[str, Expression], ...]
    operations: tuple[OpSpec, ...]
    sync_pairs: frozenset = frozenset()
    ordered: frozenset = frozenset()
    description: str = ''
    kinds: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'kinds', self._validate())

    # Проверка

    def _validate(self) -> dict[str, str]:
        var_names = [var.name for var in self.variables]
        if not var_names:
            raise ModelFormatError('модель без переменных', self.name)
        if len(set(var_names)) != len(var_names):
            raise ModelFormatError('повторяющиеся имена переменных', self.name)
        op_names = [op.name for op in self.operations]
        if len(set(op_names)) != len(op_names):
            raise ModelFormatError('повторяющиеся имена операций', self.name)

        for name, predicate in self.invariants:
            unknown = predicate.names - set(var_names)
            if unknown:
                raise ModelFormatError(
                    f"инвариант '{name}' ссылается на {sorted(unknown)}",
                    self.name
                )

        kinds = {
            var.name: 'set' if var.domain.kind == 'subsets' else 'plain'
            for var in self.variables
        }
        assigned: dict[str, set[str]] = {}
        for op in self.operations:
            scope = set(var_names) | {name for name, _ in op.params}
            expressions = [op.pre] + [effect.value for effect in op.effects]
            for expression in filter(None, expressions):
                unknown = expression.names - scope
                if unknown:
                    raise ModelFormatError(
                        f"операция '{op.name}': неизвестные имена "
                        f"{sorted(unknown)} в '{expression}'", self.name
                    )
            for effect in op.effects:
                if effect.kind not in EFFECT_KINDS:
                    raise ModelFormatError(
                        f"операция '{op.name}': неизвестный эффект "
                        f"'{effect.kind}'. Допустимые: {', '.join(EFFECT_KINDS)}",
                        self.name
                    )
                if effect.var not in kinds:
                    raise ModelFormatError(
                        f"операция '{op.name}': неизвестная переменная "
                        f"'{effect.var}'", self.name
                    )
                assigned.setdefault(effect.var, set()).add(effect.kind)

        for var, used in assigned.items():
            if kinds[var] == 'set':
                if used - {'insert', 'remove'}:
                    raise ModelFormatError(
                        f"переменная-множество '{var}' допускает только "
                        f"insert/remove, получено {sorted(used)}", self.name
                    )
            elif used & {'insert', 'remove'}:
                raise ModelFormatError(
                    f"insert/remove применимы только к множествам ('{var}')",
                    self.name
                )
            elif 'assign-lww' in used:
                if used != {'assign-lww'}:
                    raise ModelFormatError(
                        f"переменная '{var}' с assign-lww не допускает "
                        f"других эффектов: {sorted(used)}", self.name
                    )
                kinds[var] = 'lww'

        for pair in list(self.sync_pairs) + list(self.ordered):
            for name in pair:
                if name not in op_names:
                    raise ModelFormatError(
                        f"неизвестная операция '{name}' в объявлении пары",
                        self.name
                    )
        return kinds

    # Пространство состояний

    @property
    def var_names(self) -> list[str]:
        return [var.name for var in self.variables]

    def states(self):
        """ Все состояния в каноническом порядке (домены в порядке объявления) """
        names = self.var_names
        for combo in itertools.product(*(var.domain for var in self.variables)):
            yield dict(zip(names, combo))

    def state_count(self) -> int:
        count = 1
        for var in self.variables:
            count *= len(var.domain)
        return count

    def instances(self) -> list[tuple[OpSpec, OpInstance]]:
        return [(op, instance) for op in self.operations
                for instance in op.instances()]

    def estimate(self) -> int:
        """ Число комбинаций (состояние, пара экземпляров операций) """
        return self.state_count() * max(1, len(self.instances())) ** 2

    def bound(self) -> str:
        variables = ', '.join(
            f'{var.name} ∈ {var.domain.describe()}' for var in self.variables
        )
        params = '; '.join(
            f"{op.name}: " + ', '.join(
                f'{name} ∈ {domain.describe()}' for name, domain in op.params
            )
            for op in self.operations if op.params
        )
        return f'{variables}' + (f'; параметры {params}' if params else '')

    def state_key(self, state: dict) -> tuple:
        return tuple(
            _position(var.domain, state[var.name]) for var in self.variables
        )

    def instance_key(self, instance: OpInstance) -> tuple:
        names = [op.name for op in self.operations]
        op = self.operations[names.index(instance.name)]
        domains = dict(op.params)
        return (names.index(instance.name),) + tuple(
            _position(domains[name], value) for name, value in instance.args
        )

    # Инварианты

    def broken(self, state: dict) -> list[str]:
        """ Имена нарушенных инвариантов """
        return [name for name, predicate in self.invariants
                if not predicate.evaluate(state)]

    def holds(self, state: dict) -> bool:
        return not self.broken(state)

    # Синхронизация и причинность

    def synchronised(self, first: str, second: str) -> bool:
        return frozenset((first, second)) in self.sync_pairs

    def concurrent(self, first: str, second: str) -> bool:
        return (first, second) not in self.ordered \
            and (second, first) not in self.ordered

    def with_sync_pair(self, first: str, second: str) -> 'AppModel':
        return replace(
            self, sync_pairs=self.sync_pairs | {frozenset((first, second))}
        )

    def without_invariant(self, name: str) -> 'AppModel':
        if name not in dict(self.invariants):
            raise ModelFormatError(f"нет инварианта '{name}'", self.name)
        return replace(self, invariants=tuple(
            item for item in self.invariants if item[0] != name
        ))

    # Семантика эффектов

    def lift(self, state: dict) -> dict:
        """ Переводит наблюдаемое состояние во внутреннее (метки, время) """
        rich = {}
        for name, value in state.items():
            match self.kinds[name]:
                case 'set':
                    rich[name] = frozenset((element, 'init') for element in value)
                case 'lww':
                    rich[name] = (value, INITIAL_TS)
                case _:
                    rich[name] = value
        return rich

    def project(self, rich: dict) -> dict:
        """ Наблюдаемое состояние """
        state = {}
        for name, value in rich.items():
            match self.kinds[name]:
                case 'set':
                    state[name] = frozenset(element for element, _ in value)
                case 'lww':
                    state[name] = value[0]
                case _:
                    state[name] = value
        return state

    def prepare(
            self,
            op: OpSpec,
            instance: OpInstance,
            rich: dict,
            slot: int
    ) -> tuple[Effector, ...]:
        """
        Вычисляет эффект экземпляра в состоянии источника.
        slot различает конкурентные экземпляры (метки, порядок LWW).
        """
        env = {**self.project(rich), **instance.params}
        effectors = []
        for effect in op.effects:
            value = effect.value.evaluate(env)
            match effect.kind:
                case 'insert':
                    tag = (slot, str(instance))
                case 'remove':
                    tag = frozenset(
                        t for element, t in rich[effect.var] if element == value
                    )
                case 'assign-lww':
                    tag = (1, slot)
                case _:
                    tag = None
            effectors.append(Effector(effect.kind, effect.var, value, tag))
        return tuple(effectors)

    def apply(self, rich: dict, effectors) -> dict:
        rich = dict(rich)
        for effector in effectors:
            rich[effector.var] = apply_effector(rich[effector.var], effector)
        return rich


def apply_effector(current, effector: Effector):
    """ Применяет примитив к значению переменной (внутреннее представление) """
    match effector.kind:
        case 'add':
            return current + effector.value
        case 'insert':
            return current | {(effector.value, effector.tag)}
        case 'remove':
            return frozenset(
                (element, tag) for element, tag in current
                if element != effector.value or tag not in effector.tag
            )
        case 'assign-lww':
            if effector.tag > current[1]:
                return (effector.value, effector.tag)
            return current
        case 'assign':
            return effector.value
    raise ModelFormatError(f"неизвестный эффект '{effector.kind}'")


def _position(domain: Domain, value):
    try:
        return domain.index(value)
    except ValueError:
        return len(domain)


def _show(value):
    if isinstance(value, frozenset):
        return '{' + ', '.join(map(repr, sorted(value))) + '}'
    return repr(value)


def _plain(value):
    if isinstance(value, frozenset):
        return sorted(value)
    return value


def _plain_params(args) -> dict:
    return {name: _plain(value) for name, value in args}


def plain_state(state: dict) -> dict:
    return {name: _plain(value) for name, value in state.items()}
