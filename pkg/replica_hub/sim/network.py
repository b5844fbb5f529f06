"""
Модуль содержит детерминированную сеть симулятора: очередь событий,
задержки из сидированного генератора, дублирование и разбиения.
"""

import heapq
import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Any

from replica_hub.core.exceptions import PartitionFormatError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Message:
    """ Сообщение между репликами; msg_id общий у дубликатов """
    msg_id: int
    kind: str
    src: int
    dst: int
    payload: Any

    def to_dict(self):
        return {
            'id': self.msg_id, 'kind': self.kind,
            'src': self.src, 'dst': self.dst,
        }


@dataclass(order=True)
class SimEvent:
    """ Событие симулятора; обрабатываются в порядке (time, seq) """
    time: int
    seq: int
    kind: str = field(compare=False)
    data: Any = field(compare=False, default=None)


class EventQueue:
    """ Очередь событий с детерминированным порядком (время, порядок вставки) """
    def __init__(self):
        self._heap: list[SimEvent] = []
        self._counter = itertools.count()

    def push(self, time: int, kind: str, data=None) -> SimEvent:
        event = SimEvent(time, next(self._counter), kind, data)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)

    def peek_time(self) -> int | None:
        return self._heap[0].time if self._heap else None

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)


class Network:
    """
    Класс сети.

    Сообщение внутри группы разбиения доставляется с задержкой
    из [delay_min, delay_max] (и, возможно, повторно); сообщение между
    группами паркуется до heal. Порядок по каналу не гарантирован,
    если не включён fifo.
    """
    def __init__(
            self,
            n: int,
            queue: EventQueue,
            rng: random.Random,
            delay_min: int = 1,
            delay_max: int = 5,
            duplication: float = 0.0,
            fifo: bool = False
    ):
        self.n = n
        self.queue = queue
        self.rng = rng
        self.delay_min = delay_min
        self.delay_max = delay_max
        self.duplication = duplication
        self.fifo = fifo
        self.groups: list[frozenset[int]] = [frozenset(range(n))]
        self.parked: list[Message] = []
        self._group_of = {replica: 0 for replica in range(n)}
        self._link_time: dict[tuple[int, int], int] = {}
        self._ids = itertools.count(1)

    def new_message(self, kind: str, src: int, dst: int, payload) -> Message:
        return Message(next(self._ids), kind, src, dst, payload)

    def connected(self, a: int, b: int) -> bool:
        return self._group_of[a] == self._group_of[b]

    @property
    def partitioned(self) -> bool:
        return len(self.groups) > 1

    def schedule(self, message: Message, now: int):
        """ Планирует доставку или паркует сообщение до heal """
        if not self.connected(message.src, message.dst):
            self.parked.append(message)
            return
        self._enqueue(message, now)
        if self.duplication and self.rng.random() < self.duplication:
            self._enqueue(message, now)

    def partition(self, groups):
        """
        Разбивает сеть на группы.

        Выбрасывает:
            PartitionFormatError - группы пересекаются или не покрывают реплики
        """
        normalized = []
        seen = set()
        for group in groups:
            members = frozenset(int(r) for r in group)
            if not members:
                raise PartitionFormatError(groups, 'пустая группа')
            if members & seen:
                raise PartitionFormatError(groups, 'группы пересекаются')
            if any(not 0 <= r < self.n for r in members):
                raise PartitionFormatError(groups, 'реплика вне диапазона')
            seen |= members
            normalized.append(members)
        if seen != set(range(self.n)):
            raise PartitionFormatError(groups, 'группы не покрывают все реплики')
        self.groups = sorted(normalized, key=min)
        self._group_of = {
            replica: index
            for index, group in enumerate(self.groups)
            for replica in group
        }
        logger.debug(f'Разбиение сети: {[sorted(g) for g in self.groups]}')

    def heal(self, now: int) -> int:
        """ Восстанавливает связность и отправляет запаркованные сообщения """
        if not self.partitioned and not self.parked:
            return 0
        self.groups = [frozenset(range(self.n))]
        self._group_of = {replica: 0 for replica in range(self.n)}
        parked, self.parked = self.parked, []
        for message in parked:
            self.schedule(message, now)
        logger.debug(f'Сеть восстановлена, отправлено {len(parked)} сообщений')
        return len(parked)

    def park(self, message: Message):
        """ Паркует сообщение, которое пришло через разбиение """
        self.parked.append(message)

    def _enqueue(self, message: Message, now: int):
        delay = self.rng.randint(self.delay_min, self.delay_max)
        time = now + delay
        if self.fifo:
            link = (message.src, message.dst)
            time = max(time, self._link_time.get(link, 0))
            self._link_time[link] = time
        self.queue.push(time, 'deliver', message)
