"""
Модуль содержит модель данных CRDT: состояния и коммутирующие эффекты
для LWW-регистра, PN-счетчика, add-wins множества и add-wins словаря.

Состояния и эффекты - значения: после создания они не изменяются,
apply всегда возвращает новое состояние.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from replica_hub.core.bounded_counter import BoundedCounter
from replica_hub.core.exceptions import TypeMismatchError, UnknownTypeError
from replica_hub.core.models import Dot, ReplicaId
from replica_hub.core.utils import canonical

CRDT_TYPES = ('register', 'counter', 'set', 'map')

Timestamp = tuple[int, int]


# Состояния

@dataclass(frozen=True)
class LwwRegister:
    value: Any = None
    ts: Timestamp | None = None

    def to_dict(self):
        return {
            'type': 'register',
            'value': self.value,
            'ts': list(self.ts) if self.ts else None,
        }


@dataclass(frozen=True)
class PnCounter:
    inc: dict[ReplicaId, int] = field(default_factory=dict)
    dec: dict[ReplicaId, int] = field(default_factory=dict)

    def to_dict(self):
        return {
            'type': 'counter',
            'inc': {str(r): v for r, v in sorted(self.inc.items())},
            'dec': {str(r): v for r, v in sorted(self.dec.items())},
        }


@dataclass(frozen=True)
class AwSet:
    # элемент присутствует iff его множество меток не пусто
    entries: dict[Any, frozenset[Dot]] = field(default_factory=dict)

    def to_dict(self):
        return {
            'type': 'set',
            'entries': sorted(
                ([elem, sorted(dots)] for elem, dots in self.entries.items()),
                key=lambda item: canonical(item[0])
            ),
        }


@dataclass(frozen=True)
class FieldEntry:
    """
    Поле словаря одного типа.

    ops - метка обновления -> вложенный эффект, в порядке доставки
          (только не удалённые)
    state - свёртка ops в этом порядке
    """
    ops: dict[Dot, Any]
    state: Any

    def to_dict(self):
        return {'ops': sorted(self.ops.items()), 'state': self.state}


def _fold_field(type_tag: str, ops: dict) -> FieldEntry:
    # ops уже упорядочены причинно
    state = new_state(type_tag)
    for nested in ops.values():
        state = apply(state, nested)
    return FieldEntry(ops, state)


@dataclass(frozen=True)
class AwMap:
    """
    Add-wins словарь.

    entries - (поле, тип) -> FieldEntry

    Поле хранится отдельно для каждого типа, поэтому конкурентные
    обновления одного поля разными типами не конфликтуют. При чтении
    видна версия с наибольшей меткой.
    Удаление поля убирает наблюдённые метки вместе с их вложенными
    эффектами; конкурентное обновление переживает удаление, но
    содержит только свой вклад.
    """
    entries: dict[tuple[Any, str], FieldEntry] = field(default_factory=dict)

    def typed(self, key, type_tag: str):
        """ Вложенное состояние поля данного типа (пустое, если поля нет) """
        entry = self.entries.get((key, type_tag))
        return new_state(type_tag) if entry is None else entry.state

    def observed(self, key) -> frozenset[Dot]:
        """ Все живые метки поля, всех типов """
        return frozenset(
            dot for (name, _), entry in self.entries.items() if name == key
            for dot in entry.ops
        )

    def visible(self) -> dict:
        """ Поле -> (тип, состояние) версии с наибольшей меткой """
        chosen = {}
        for (name, type_tag), entry in self.entries.items():
            latest = max(entry.ops)
            if name not in chosen or latest > chosen[name][0]:
                chosen[name] = (latest, type_tag, entry.state)
        return {name: (tag, state) for name, (_, tag, state) in chosen.items()}

    def to_dict(self):
        fields = [[name, type_tag, entry]
                  for (name, type_tag), entry in self.entries.items()]
        return {
            'type': 'map',
            'fields': sorted(fields,
                             key=lambda item: canonical(item[:2])),
        }


# Эффекты

@dataclass(frozen=True)
class RegisterAssign:
    value: Any
    ts: Timestamp

    def to_dict(self):
        return {'op': 'assign', 'value': self.value, 'ts': list(self.ts)}


@dataclass(frozen=True)
class CounterAdd:
    origin: ReplicaId
    delta: int

    def to_dict(self):
        return {'op': 'add', 'origin': self.origin, 'delta': self.delta}


@dataclass(frozen=True)
class SetAdd:
    element: Any
    dot: Dot

    def to_dict(self):
        return {'op': 'set-add', 'element': self.element, 'dot': self.dot}


@dataclass(frozen=True)
class SetRemove:
    element: Any
    observed: frozenset[Dot]

    def to_dict(self):
        return {
            'op': 'set-remove',
            'element': self.element,
            'observed': sorted(self.observed),
        }


@dataclass(frozen=True)
class MapUpdate:
    field: Any
    effect: Any
    dot: Dot

    def to_dict(self):
        return {
            'op': 'map-update',
            'field': self.field,
            'effect': self.effect,
            'dot': self.dot,
        }


@dataclass(frozen=True)
class MapRemove:
    field: Any
    observed: frozenset[Dot]

    def to_dict(self):
        return {
            'op': 'map-remove',
            'field': self.field,
            'observed': sorted(self.observed),
        }


@dataclass(frozen=True)
class BoundedMerge:
    """ Эффект Bounded Counter: полное состояние, применяется слиянием """
    state: BoundedCounter

    def to_dict(self):
        return {'op': 'bcounter-merge', 'state': self.state}


_EFFECT_TYPES = {
    RegisterAssign: 'register',
    CounterAdd: 'counter',
    SetAdd: 'set',
    SetRemove: 'set',
    MapUpdate: 'map',
    MapRemove: 'map',
    BoundedMerge: 'bcounter',
}

_STATE_TYPES = {
    LwwRegister: 'register',
    PnCounter: 'counter',
    AwSet: 'set',
    AwMap: 'map',
    BoundedCounter: 'bcounter',
}


def type_of(state) -> str:
    """ Тэг типа состояния """
    try:
        return _STATE_TYPES[type(state)]
    except KeyError:
        raise UnknownTypeError(type(state).__name__)


def effect_type(effect) -> str:
    """ Тэг типа, к которому применим эффект """
    try:
        return _EFFECT_TYPES[type(effect)]
    except KeyError:
        raise UnknownTypeError(type(effect).__name__)


def new_state(type_tag: str):
    """
    Возвращает пустое (нижнее) состояние типа.

    Выбрасывает:
        UnknownTypeError
    """
    match type_tag:
        case 'register':
            return LwwRegister()
        case 'counter':
            return PnCounter()
        case 'set':
            return AwSet()
        case 'map':
            return AwMap()
        case _:
            raise UnknownTypeError(type_tag)


def apply(state, effect):
    """
    Применяет эффект к состоянию и возвращает новое состояние.

    Выбрасывает:
        TypeMismatchError - эффект не подходит к типу состояния
    """
    state_tag = type_of(state)
    tag = effect_type(effect)
    if state_tag != tag:
        raise TypeMismatchError(state_tag, tag)

    match effect:
        case RegisterAssign(value=value, ts=ts):
            # равные ts возможны только внутри одной транзакции
            if state.ts is None or tuple(ts) >= tuple(state.ts):
                return LwwRegister(value, tuple(ts))
            return state
        case CounterAdd(origin=origin, delta=delta):
            if delta > 0:
                inc = dict(state.inc)
                inc[origin] = inc.get(origin, 0) + delta
                return PnCounter(inc, state.dec)
            if delta < 0:
                dec = dict(state.dec)
                dec[origin] = dec.get(origin, 0) - delta
                return PnCounter(state.inc, dec)
            return state
        case SetAdd(element=element, dot=dot):
            entries = dict(state.entries)
            entries[element] = entries.get(element, frozenset()) | {dot}
            return AwSet(entries)
        case SetRemove(element=element, observed=observed):
            if element not in state.entries:
                return state
            entries = dict(state.entries)
            remaining = entries[element] - observed
            if remaining:
                entries[element] = remaining
            else:
                del entries[element]
            return AwSet(entries)
        case MapUpdate(field=key, effect=nested, dot=dot):
            slot = (key, effect_type(nested))
            entry = state.entries.get(slot) or FieldEntry({}, new_state(slot[1]))
            entries = dict(state.entries)
            entries[slot] = FieldEntry(
                {**entry.ops, dot: nested}, apply(entry.state, nested)
            )
            return AwMap(entries)
        case MapRemove(field=key, observed=observed):
            entries = dict(state.entries)
            changed = False
            for slot, entry in state.entries.items():
                if slot[0] != key or not entry.ops.keys() & observed:
                    continue
                changed = True
                remaining = {
                    dot: op for dot, op in entry.ops.items() if dot not in observed
                }
                if remaining:
                    entries[slot] = _fold_field(slot[1], remaining)
                else:
                    del entries[slot]
            return AwMap(entries) if changed else state
        case BoundedMerge(state=incoming):
            return state.merge(incoming)


def value_of(state):
    """
    Значение состояния для чтения:
        register -> значение, counter -> сумма, set -> frozenset элементов,
        map -> словарь значений живых полей, bcounter -> значение счетчика
    """
    match state:
        case LwwRegister():
            return state.value
        case PnCounter():
            return sum(state.inc.values()) - sum(state.dec.values())
        case AwSet():
            return frozenset(state.entries)
        case AwMap():
            return {
                key: value_of(nested)
                for key, (_, nested) in state.visible().items()
            }
        case BoundedCounter():
            return state.value()
        case _:
            raise UnknownTypeError(type(state).__name__)


def concurrent_commute(state, first, second) -> bool:
    """ True, если порядок применения двух эффектов не влияет на результат """
    forward = apply(apply(state, first), second)
    backward = apply(apply(state, second), first)
    return forward == backward


def stamp(effect, ts: Timestamp):
    """ Проставляет итоговую метку времени во все присваивания эффекта """
    match effect:
        case RegisterAssign(value=value):
            return RegisterAssign(value, ts)
        case MapUpdate(field=key, effect=nested, dot=dot):
            return MapUpdate(key, stamp(nested, ts), dot)
        case _:
            return effect
