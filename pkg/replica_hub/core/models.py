""" Модуль содержит основные модели данных хранилища """

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

ReplicaId = int

TYPE_TAGS = ('register', 'counter', 'set', 'map', 'bcounter')


@dataclass(frozen=True)
class VectorClock:
    """
    Векторные часы: номер последней применённой транзакции для каждой реплики.

    Отсутствующая запись равна 0. Частичный порядок - поточечное <=,
    объединение (join) - поточечный максимум.
    """
    entries: tuple[tuple[int, int], ...] = ()
    _index: dict = field(
        default_factory=dict, compare=False, repr=False, hash=False
    )

    def __post_init__(self):
        object.__setattr__(self, '_index', dict(self.entries))

    @classmethod
    def of(cls, mapping: dict | None = None) -> VectorClock:
        """ Создает часы из словаря {реплика: номер}, отбрасывая нули """
        mapping = mapping or {}
        for replica, seq in mapping.items():
            if seq < 0:
                raise ValueError(
                    f'Номер последовательности не может быть отрицательным: '
                    f'{replica}={seq}'
                )
        return cls(tuple(sorted(
            (int(r), int(s)) for r, s in mapping.items() if s
        )))

    @classmethod
    def zero(cls) -> VectorClock:
        return cls()

    def get(self, replica: ReplicaId) -> int:
        return self._index.get(replica, 0)

    def __le__(self, other: VectorClock) -> bool:
        other_index = other._index
        return all(
            seq <= other_index.get(replica, 0)
            for replica, seq in self.entries
        )

    def __lt__(self, other: VectorClock) -> bool:
        return self <= other and self != other

    def __ge__(self, other: VectorClock) -> bool:
        return other <= self

    def __gt__(self, other: VectorClock) -> bool:
        return other < self

    def join(self, other: VectorClock) -> VectorClock:
        merged = dict(self._index)
        for replica, seq in other.entries:
            if seq > merged.get(replica, 0):
                merged[replica] = seq
        return VectorClock.of(merged)

    def with_entry(self, replica: ReplicaId, seq: int) -> VectorClock:
        merged = dict(self._index)
        merged[replica] = seq
        return VectorClock.of(merged)

    def as_dict(self) -> dict[int, int]:
        return dict(self._index)

    def to_dict(self):
        return {str(replica): seq for replica, seq in self.entries}

    @classmethod
    def from_dict(cls, data: dict):
        return cls.of({int(r): int(s) for r, s in (data or {}).items()})

    def __str__(self):
        inner = ','.join(f'{r}:{s}' for r, s in self.entries)
        return '{' + inner + '}'


@dataclass(frozen=True, order=True)
class Dot:
    """ Уникальная метка операции: (реплика-источник, счетчик) """
    origin: ReplicaId
    counter: int

    def to_dict(self):
        return [self.origin, self.counter]


@dataclass(frozen=True, order=True)
class ObjectKey:
    """
    Ключ объекта хранилища.
    Пара (bucket, key) навсегда определяет один объект одного типа.
    """
    bucket: str
    key: str
    type_tag: str

    def __post_init__(self):
        if not isinstance(self.bucket, str) or not self.bucket.strip():
            raise ValueError('Bucket объекта не должен быть пустым.')
        if not isinstance(self.key, str) or not self.key.strip():
            raise ValueError('Ключ объекта не должен быть пустым.')
        if self.type_tag not in TYPE_TAGS:
            raise ValueError(
                f"Неизвестный тип объекта '{self.type_tag}'. "
                f"Допустимые: {', '.join(TYPE_TAGS)}"
            )

    @property
    def path(self) -> str:
        return f'{self.bucket}/{self.key}'

    def to_dict(self):
        return [self.bucket, self.key, self.type_tag]

    @classmethod
    def from_list(cls, data) -> ObjectKey:
        """ Создает ключ из списка [bucket, key, type] (формат сценариев) """
        if not isinstance(data, (list, tuple)) or len(data) != 3:
            raise ValueError(
                f'Ключ объекта должен быть списком [bucket, key, type]: {data}'
            )
        return cls(str(data[0]), str(data[1]), str(data[2]))

    def __str__(self):
        return f'{self.path}:{self.type_tag}'


@dataclass(frozen=True, order=True)
class TxnId:
    """ Идентификатор транзакции: реплика-источник и плотный номер """
    origin: ReplicaId
    seq: int

    def to_dict(self):
        return [self.origin, self.seq]

    def __str__(self):
        return f'T{self.origin}.{self.seq}'


@dataclass(frozen=True)
class TxnRecord:
    """
    Запись зафиксированной транзакции - единица атомарной репликации.

    Атрибуты:
        txn_id - идентификатор транзакции
        snapshot - причинные зависимости (снимок, из которого читала транзакция)
        writes - пары (ключ, эффекты) в порядке программы
        commit - snapshot, объединённый с {origin: seq}
        lamport - логическое время фиксации (для LWW-регистров)
        fragment - (номер, всего), только при абляции no-atomic-writes
    """
    txn_id: TxnId
    snapshot: VectorClock
    writes: tuple[tuple[ObjectKey, tuple[Any, ...]], ...]
    commit: VectorClock
    lamport: int
    fragment: tuple[int, int] | None = None

    @property
    def origin(self) -> ReplicaId:
        return self.txn_id.origin

    @property
    def seq(self) -> int:
        return self.txn_id.seq

    @property
    def keys(self) -> tuple[ObjectKey, ...]:
        return tuple(key for key, _ in self.writes)

    def split(self) -> list[TxnRecord]:
        """ Разбивает запись на фрагменты по объектам (абляция атомарности) """
        total = len(self.writes)
        return [
            TxnRecord(
                self.txn_id, self.snapshot, (write,), self.commit,
                self.lamport, (index, total)
            )
            for index, write in enumerate(self.writes)
        ]

    def to_dict(self):
        data = {
            'id': self.txn_id,
            'snapshot': self.snapshot,
            'commit': self.commit,
            'lamport': self.lamport,
            'writes': [[key, list(effects)] for key, effects in self.writes],
        }
        if self.fragment:
            data['fragment'] = list(self.fragment)
        return data


class Session:
    """
    Класс клиентской сессии.
    Хранит last_seen - часы, которые клиент переносит между транзакциями
    (в том числе между репликами). Значение только растёт.
    """
    def __init__(self, name: str, last_seen: VectorClock | None = None):
        if not isinstance(name, str) or not name.strip():
            raise ValueError('Имя сессии не должно быть пустым.')
        self.name = name
        self.last_seen = last_seen or VectorClock.zero()

    def observe(self, clock: VectorClock):
        """ Запоминает увиденные часы (монотонно) """
        self.last_seen = self.last_seen.join(clock)

    def to_dict(self):
        return {'name': self.name, 'last_seen': self.last_seen}

    def __repr__(self):
        return f'Session({self.name!r}, last_seen={self.last_seen})'
