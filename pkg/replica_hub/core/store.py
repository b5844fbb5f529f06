"""
Модуль содержит реплику хранилища с транзакционной причинной
согласованностью (TCC): причинные снимки, буферизованные записи,
атомарная фиксация и причинная доставка транзакций целиком.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable

from replica_hub.core.bounded_counter import BoundedCounter
from replica_hub.core.crdt import (
    BoundedMerge,
    CounterAdd,
    MapRemove,
    MapUpdate,
    RegisterAssign,
    SetAdd,
    SetRemove,
    apply,
    new_state,
    stamp,
    value_of,
)
from replica_hub.core.exceptions import (
    ClockNotCoveredError,
    CounterConfigError,
    InsufficientRightsError,
    TokenConflictError,
    TxnStateError,
    TypeMismatchError,
)
from replica_hub.core.models import (
    Dot,
    ObjectKey,
    ReplicaId,
    Session,
    TxnId,
    TxnRecord,
    VectorClock,
)
from replica_hub.decorators import log_action

logger = logging.getLogger(__name__)

ABLATIONS = ('no-causal-deps', 'no-atomic-writes', 'no-snapshots')

OPEN, COMMITTED, ABORTED = 'open', 'committed', 'aborted'


@dataclass(frozen=True)
class CounterOp:
    """ Отложенная операция над Bounded Counter (повторяется при фиксации) """
    name: str
    args: tuple

    def run(self, state: BoundedCounter, replica: ReplicaId) -> BoundedCounter:
        match self.name:
            case 'increment':
                return state.increment(replica, *self.args)
            case 'decrement':
                return state.decrement(replica, *self.args)
            case 'transfer':
                target, amount = self.args
                return state.transfer(replica, target, amount)
            case _:
                raise ValueError(
                    f"Неизвестная операция счетчика '{self.name}'."
                )


class Transaction:
    """
    Дескриптор открытой транзакции на реплике.

    Чтения видят ровно snapshot и собственный буфер записей;
    snapshot фиксируется в момент begin.
    """
    def __init__(
            self,
            replica: Replica,
            number: int,
            snapshot: VectorClock,
            session: Session,
            owner: str | None = None
    ):
        self.replica = replica
        self.number = number
        self.snapshot = snapshot
        self.session = session
        self.owner = owner
        self.read_set: set[ObjectKey] = set()
        self.writes: dict[ObjectKey, list] = {}
        self.status = OPEN

    @property
    def label(self) -> str:
        return f'{self.replica.id}#{self.number}'

    def read(self, key: ObjectKey):
        return self.replica.read(self, key)

    def update(self, key: ObjectKey, op):
        return self.replica.update(self, key, op)

    def commit(self) -> VectorClock:
        return self.replica.commit(self)

    def abort(self):
        return self.replica.abort(self)

    def __repr__(self):
        return f'Transaction({self.label}, {self.status}, {self.snapshot})'


class Replica:
    """
    Класс реплики: однопоточный детерминированный автомат.

    Атрибуты:
        id - идентификатор реплики
        applied - часы применённых транзакций
        log - применённые записи в порядке применения
        pending - полученные, но еще не доставляемые записи
        cache - материализованное текущее состояние объектов
        violations - нарушения инвариантов хранилища (только при абляциях)
    """
    def __init__(
            self,
            replica_id: ReplicaId,
            n: int,
            counters: dict[ObjectKey, BoundedCounter] | None = None,
            ablations=(),
            send: Callable[[TxnRecord], Any] | None = None,
            emit: Callable[[str, dict], Any] | None = None
    ):
        unknown = set(ablations) - set(ABLATIONS)
        if unknown:
            raise ValueError(f'Неизвестные абляции: {sorted(unknown)}')
        self.id = replica_id
        self.n = n
        self.counters = dict(counters or {})
        self.ablations = frozenset(ablations)
        self.applied = VectorClock.zero()
        self.log: list[TxnRecord] = []
        self.pending: list[TxnRecord] = []
        self.cache: dict[ObjectKey, Any] = {}
        self.lamport = 0
        self.violations: list[str] = []
        self.tokens: dict[ObjectKey, str] = {}
        self._send = send or (lambda record: None)
        self._emit = emit or (lambda category, payload: None)
        self._seen: set = set()
        self._frontier: dict[ReplicaId, int] = {}
        self._fragments: dict[TxnId, set[int]] = {}
        self._dots = 0
        self._txn_numbers = 0

    # Начало и чтение

    def covers(self, clock: VectorClock) -> bool:
        """ True, если реплика уже применила всё, что описывают часы """
        return clock <= self.applied

    @log_action('BEGIN')
    def begin(
            self,
            session: Session,
            fence: VectorClock | None = None,
            owner: str | None = None
    ) -> Transaction:
        """
        Открывает транзакцию со снимком, равным applied.

        Снимок должен покрывать last_seen сессии (и fence токенов, если задан).
        Ожидание покрытия моделирует симулятор; здесь непокрытые часы - ошибка.

        Выбрасывает:
            ClockNotCoveredError
        """
        required = session.last_seen
        if fence is not None:
            required = required.join(fence)
        if not self.covers(required):
            raise ClockNotCoveredError(required, self.applied)
        self._txn_numbers += 1
        txn = Transaction(self, self._txn_numbers, self.applied, session, owner)
        session.observe(txn.snapshot)
        self._emit('begin', {
            'txn': txn.label, 'session': session.name, 'snapshot': txn.snapshot
        })
        return txn

    def read(self, txn: Transaction, key: ObjectKey):
        """ Значение объекта в снимке транзакции с учётом её буфера """
        self._check_open(txn)
        txn.read_set.add(key)
        value = value_of(self._view(txn, key))
        self._emit('read', {'txn': txn.label, 'key': key, 'value': value})
        return value

    def materialise(self, key: ObjectKey, at: VectorClock):
        """
        Состояние объекта в снимке at: свёртка эффектов всех записей журнала
        с commit <= at.

        Выбрасывает:
            ClockNotCoveredError - если at не покрыт applied
        """
        if not at <= self.applied:
            raise ClockNotCoveredError(at, self.applied)
        if at == self.applied:
            return self.current(key)
        state = self.bottom(key)
        for record in self.log:
            if not record.commit <= at:
                continue
            for written, effects in record.writes:
                if written == key:
                    for effect in effects:
                        state = apply(state, effect)
        return state

    def current(self, key: ObjectKey):
        """ Текущее (применённое) состояние объекта """
        state = self.cache.get(key)
        return state if state is not None else self.bottom(key)

    def value(self, key: ObjectKey):
        """ Текущее значение объекта на реплике """
        return value_of(self.current(key))

    def bottom(self, key: ObjectKey):
        """ Начальное состояние объекта """
        if key.type_tag == 'bcounter':
            try:
                return self.counters[key]
            except KeyError:
                raise CounterConfigError(
                    f'счетчик {key} не объявлен в конфигурации'
                )
        return new_state(key.type_tag)

    # Запись

    def update(self, txn: Transaction, key: ObjectKey, op):
        """
        Переводит высокоуровневую операцию в эффекты и добавляет их в буфер.

        Операции (кортеж или список):
            register: ('assign', value)
            counter: ('add', delta) | ('increment', n) | ('decrement', n)
            set: ('add', element) | ('remove', element)
            map: ('update', field, type, nested_op) | ('remove', field)
            bcounter: ('increment', n) | ('decrement', n) | ('transfer', to, n)

        Выбрасывает:
            TypeMismatchError, InsufficientRightsError (для bcounter)
        """
        self._check_open(txn)
        if key.type_tag == 'bcounter':
            counter_op = self._counter_op(op)
            # проверка на текущем виде: ошибка не меняет буфер
            counter_op.run(self._view(txn, key), self.id)
            txn.writes.setdefault(key, []).append(counter_op)
            return
        effect = self._translate(key.type_tag, self._view(txn, key), op)
        txn.writes.setdefault(key, []).append(effect)

    @log_action('COMMIT')
    def commit(self, txn: Transaction) -> VectorClock:
        """
        Атомарно фиксирует транзакцию: применяет запись локально и рассылает
        её остальным репликам. Возвращает часы фиксации.

        Выбрасывает:
            TxnStateError, TokenConflictError,
            InsufficientRightsError (повтор операций bcounter)
        """
        self._check_open(txn)
        for key in txn.writes:
            holder = self.tokens.get(key)
            if holder is not None and holder != txn.owner:
                self._close(txn, ABORTED)
                raise TokenConflictError(key, holder)

        if not txn.writes:
            self._close(txn, COMMITTED)
            self._emit('commit', {'txn': txn.label, 'read_only': True})
            return txn.snapshot

        lamport = self.lamport + 1
        ts = (lamport, self.id)
        writes = []
        for key, items in txn.writes.items():
            if key.type_tag == 'bcounter':
                state = self.current(key)
                try:
                    for counter_op in items:
                        state = counter_op.run(state, self.id)
                except InsufficientRightsError:
                    self._close(txn, ABORTED)
                    raise
                writes.append((key, (BoundedMerge(state),)))
            else:
                writes.append((key, tuple(stamp(e, ts) for e in items)))

        seq = self.applied.get(self.id) + 1
        record = TxnRecord(
            TxnId(self.id, seq),
            txn.snapshot,
            tuple(writes),
            txn.snapshot.with_entry(self.id, seq),
            lamport
        )
        self._apply(record)
        self._close(txn, COMMITTED)
        txn.session.observe(record.commit)
        self._emit('commit', {'txn': txn.label, 'record': record})

        if 'no-atomic-writes' in self.ablations and len(record.writes) > 1:
            for fragment in record.split():
                self._send(fragment)
        else:
            self._send(record)
        return record.commit

    @log_action('ABORT')
    def abort(self, txn: Transaction):
        """ Отменяет транзакцию: буфер отбрасывается """
        self._check_open(txn)
        self._close(txn, ABORTED)
        self._emit('abort', {'txn': txn.label})

    # Репликация

    @log_action('RECEIVE', verbose=True)
    def receive(self, record: TxnRecord) -> int:
        """
        Принимает запись от другой реплики.
        Доставляемая запись применяется, затем транзитивно разбирается pending.
        Возвращает число применённых записей (дубликат -> 0).
        """
        ident = self._ident(record)
        if ident in self._seen or any(
            self._ident(p) == ident for p in self.pending
        ):
            self._emit('duplicate', {'id': record.txn_id})
            return 0
        self._emit('receive', {'id': record.txn_id, 'commit': record.commit})

        if 'no-causal-deps' in self.ablations:
            self._apply(record)
            return 1
        if not self._deliverable(record):
            self.pending.append(record)
            self._emit('pending', {'id': record.txn_id})
            return 0

        self._apply(record)
        applied = 1
        progress = True
        while progress:
            progress = False
            for waiting in list(self.pending):
                if self._deliverable(waiting):
                    self.pending.remove(waiting)
                    self._apply(waiting)
                    applied += 1
                    progress = True
        return applied

    @property
    def partial(self) -> list[TxnId]:
        """ Транзакции, видимые лишь частично (только при no-atomic-writes) """
        return sorted(self._fragments)

    def hold_token(self, key: ObjectKey, owner: str):
        self.tokens[key] = owner

    def drop_token(self, key: ObjectKey):
        self.tokens.pop(key, None)

    def state_digest(self) -> dict:
        """ Материализованное состояние всех объектов (для сравнения реплик) """
        return {str(key): state for key, state in sorted(self.cache.items())}

    # Внутренние методы

    def _view(self, txn: Transaction, key: ObjectKey):
        if 'no-snapshots' in self.ablations:
            state = self.current(key)
        else:
            state = self.materialise(key, txn.snapshot)
        items = txn.writes.get(key, ())
        if key.type_tag == 'bcounter':
            for counter_op in items:
                state = counter_op.run(state, self.id)
            return state
        # собственные записи видны поверх всего, что реплика уже применила
        provisional = (self.lamport + 1, self.id)
        for effect in items:
            state = apply(state, stamp(effect, provisional))
        return state

    def _translate(self, type_tag: str, view, op):
        name, *args = op
        match type_tag, name:
            case 'register', 'assign':
                (value,) = args
                return RegisterAssign(value, (0, self.id))
            case 'counter', 'add':
                (delta,) = args
                return CounterAdd(self.id, int(delta))
            case 'counter', 'increment':
                (amount,) = args
                return CounterAdd(self.id, abs(int(amount)))
            case 'counter', 'decrement':
                (amount,) = args
                return CounterAdd(self.id, -abs(int(amount)))
            case 'set', 'add':
                (element,) = args
                return SetAdd(element, self._next_dot())
            case 'set', 'remove':
                (element,) = args
                observed = view.entries.get(element, frozenset())
                return SetRemove(element, observed)
            case 'map', 'update':
                field, nested_tag, nested_op = args
                nested = view.typed(field, nested_tag)
                nested_effect = self._translate(nested_tag, nested, nested_op)
                return MapUpdate(field, nested_effect, self._next_dot())
            case 'map', 'remove':
                (field,) = args
                return MapRemove(field, view.observed(field))
            case _:
                raise TypeMismatchError(type_tag, name)

    def _counter_op(self, op) -> CounterOp:
        name, *args = op
        if name not in ('increment', 'decrement', 'transfer'):
            raise TypeMismatchError('bcounter', name)
        return CounterOp(name, tuple(args))

    def _next_dot(self) -> Dot:
        self._dots += 1
        return Dot(self.id, self._dots)

    @staticmethod
    def _ident(record: TxnRecord):
        if record.fragment is None:
            return record.txn_id
        return record.txn_id, record.fragment[0]

    def _deliverable(self, record: TxnRecord) -> bool:
        if not record.snapshot <= self.applied:
            return False
        current = self.applied.get(record.origin)
        if record.fragment is not None:
            return current >= record.seq - 1
        return current == record.seq - 1

    def _apply(self, record: TxnRecord):
        origin, seq = record.origin, record.seq
        self._check_invariants(record)

        updated = {}
        for key, effects in record.writes:
            state = updated.get(key, self.current(key))
            for effect in effects:
                state = apply(state, effect)
            updated[key] = state
        self.cache.update(updated)
        self.log.append(record)
        self._seen.add(self._ident(record))
        self.lamport = max(self.lamport, record.lamport)
        if seq > self.applied.get(origin):
            self.applied = self.applied.with_entry(origin, seq)

        if record.fragment is None:
            self._seen.add(record.txn_id)
        else:
            index, total = record.fragment
            parts = self._fragments.setdefault(record.txn_id, set())
            parts.add(index)
            if len(parts) == total:
                del self._fragments[record.txn_id]
                self._seen.add(record.txn_id)
            elif len(parts) == 1:
                self._violation(
                    'atomic', f'транзакция {record.txn_id} видна частично'
                )

        frontier = self._frontier.get(origin, 0)
        while TxnId(origin, frontier + 1) in self._seen:
            frontier += 1
        self._frontier[origin] = frontier
        self._emit('apply', {'id': record.txn_id, 'applied': self.applied})

    def _check_invariants(self, record: TxnRecord):
        origin, seq = record.origin, record.seq
        frontier = self._frontier.get(origin, 0)
        if record.fragment is None and frontier != seq - 1:
            self._violation(
                'fifo',
                f'запись {record.txn_id} применяется при {origin}:{frontier}'
            )
        for replica, needed in record.snapshot.entries:
            if replica == origin:
                continue
            if self._frontier.get(replica, 0) < needed:
                self._violation(
                    'causal',
                    f'запись {record.txn_id} зависит от {replica}:{needed}, '
                    f'применено {self._frontier.get(replica, 0)}'
                )
                break

    def _violation(self, kind: str, message: str):
        self.violations.append(f'{kind}: {message}')
        self._emit('violation', {'kind': kind, 'message': message})
        logger.warning(f'Реплика {self.id}: нарушение {kind}: {message}')

    @staticmethod
    def _check_open(txn: Transaction):
        if txn.status != OPEN:
            raise TxnStateError(txn.label, txn.status)

    def _close(self, txn: Transaction, status: str):
        txn.status = status

    def __repr__(self):
        return f'Replica({self.id}, applied={self.applied})'

