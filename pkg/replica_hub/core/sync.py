"""
Модуль содержит выборочную CP-синхронизацию:
    - эксклюзивные токены на объекты (координатор - статический TokenHome);
    - синхронную передачу прав Bounded Counter между репликами.

Протоколы написаны как генераторы: они отдают симулятору команды
Sleep / WaitUntil и продолжаются, когда условие выполнено.
Если условие не может выполниться до снятия разбиения, процесс
считается заблокированным (Blocked) - это состояние, а не ошибка.
"""

from __future__ import annotations

import inspect
import logging
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from replica_hub.core.exceptions import InsufficientRightsError, TokenNotHeldError
from replica_hub.core.models import ObjectKey, ReplicaId, Session, VectorClock
from replica_hub.core.store import Replica
from replica_hub.decorators import log_action

logger = logging.getLogger(__name__)

OK, DENIED = 'ok', 'denied'


@dataclass(frozen=True)
class Sleep:
    """ Команда процесса: продолжить через ticks тактов """
    ticks: int


@dataclass(frozen=True)
class WaitUntil:
    """ Команда процесса: продолжить, когда predicate() станет истинным """
    predicate: Callable[[], bool]
    reason: str
    detail: str = ''


def token_home(key: ObjectKey, n: int) -> ReplicaId:
    """ Реплика-координатор токена объекта (детерминированна для ключа) """
    return zlib.crc32(key.path.encode('utf-8')) % n


@dataclass
class SyncToken:
    """
    Состояние токена у координатора.

    Атрибуты:
        key - защищаемый объект
        holder - (реплика, id запроса) текущего владельца или None
        fence - часы последней защищённой фиксации (только растут)
        queue - ожидающие запросы в порядке прихода
    """
    key: ObjectKey
    holder: tuple[ReplicaId, str] | None = None
    fence: VectorClock = field(default_factory=VectorClock.zero)
    queue: deque = field(default_factory=deque)

    def to_dict(self):
        return {
            'key': self.key,
            'holder': list(self.holder) if self.holder else None,
            'fence': self.fence,
            'queue': [list(item) for item in self.queue],
        }


@dataclass(frozen=True)
class HeldToken:
    """ Токен на стороне владельца """
    key: ObjectKey
    replica: ReplicaId
    request_id: str
    fence: VectorClock


class SyncAgent:
    """
    Класс агента синхронизации на реплике.
    Обслуживает токены, для которых реплика является TokenHome,
    а также запросы на передачу прав счетчиков.
    """
    def __init__(
            self,
            replica: Replica,
            n: int,
            send: Callable[[ReplicaId, str, dict], Any] | None = None,
            emit: Callable[[str, dict], Any] | None = None
    ):
        self.replica = replica
        self.replica_id = replica.id
        self.n = n
        self.tokens: dict[ObjectKey, SyncToken] = {}
        self.held: dict[str, HeldToken] = {}
        self._send = send or (lambda dst, kind, payload: None)
        self._emit = emit or (lambda category, payload: None)
        self._grants: dict[str, VectorClock] = {}
        self._rights_replies: dict[str, tuple[int, VectorClock | None]] = {}
        self._waiting: set[str] = set()
        self._requests = 0

    # Токены: сторона запрашивающего

    def request_token(self, key: ObjectKey, owner: str) -> str:
        request_id = self._next_request()
        self._waiting.add(request_id)
        home = token_home(key, self.n)
        self._emit('token', {
            'event': 'request', 'key': key, 'request': request_id, 'home': home
        })
        payload = {
            'key': key, 'request': request_id,
            'requester': self.replica_id, 'owner': owner,
        }
        if home == self.replica_id:
            self._on_token_request(payload)
        else:
            self._send(home, 'token-request', payload)
        return request_id

    def granted(self, request_id: str) -> bool:
        return request_id in self._grants

    def take_grant(self, key: ObjectKey, request_id: str, owner: str) -> HeldToken:
        fence = self._grants.pop(request_id)
        self._waiting.discard(request_id)
        token = HeldToken(key, self.replica_id, request_id, fence)
        self.held[request_id] = token
        self.replica.hold_token(key, owner)
        return token

    @log_action('RELEASE')
    def release_token(self, token: HeldToken, clock: VectorClock | None):
        """
        Возвращает токен координатору; fence := fence ⊔ clock.

        Выбрасывает:
            TokenNotHeldError
        """
        if self.held.get(token.request_id) != token:
            raise TokenNotHeldError(token.key, self.replica_id)
        del self.held[token.request_id]
        self.replica.drop_token(token.key)
        self._emit('token', {
            'event': 'release', 'key': token.key,
            'request': token.request_id, 'clock': clock,
        })
        payload = {'key': token.key, 'request': token.request_id, 'clock': clock}
        home = token_home(token.key, self.n)
        if home == self.replica_id:
            self._on_token_release(payload)
        else:
            self._send(home, 'token-release', payload)

    # Права счетчиков: сторона запрашивающего

    def request_rights(self, peer: ReplicaId, key: ObjectKey, amount: int) -> str:
        request_id = self._next_request()
        self._waiting.add(request_id)
        self._emit('rights', {
            'event': 'request', 'key': key, 'peer': peer,
            'amount': amount, 'request': request_id,
        })
        self._send(peer, 'rights-request', {
            'key': key, 'request': request_id,
            'requester': self.replica_id, 'amount': amount,
        })
        return request_id

    def has_rights_reply(self, request_id: str) -> bool:
        return request_id in self._rights_replies

    def take_rights_reply(self, request_id: str):
        self._waiting.discard(request_id)
        return self._rights_replies.pop(request_id)

    @log_action('TRANSFER')
    def return_rights(self, key: ObjectKey, peer: ReplicaId, amount: int) -> int:
        """ Отдаёт донору полученные права обратно (не больше, чем осталось) """
        available = self.replica.current(key).local_rights(self.replica_id)
        amount = min(amount, max(available, 0))
        if amount > 0:
            txn = self.replica.begin(Session(f'sync-{self.replica_id}'))
            txn.update(key, ('transfer', peer, amount))
            txn.commit()
            self._emit('rights', {
                'event': 'return', 'key': key, 'peer': peer, 'amount': amount,
            })
        return amount

    # Обработка сообщений

    def handle(self, kind: str, payload: dict):
        """ Обрабатывает управляющее сообщение, доставленное сетью """
        match kind:
            case 'token-request':
                self._on_token_request(payload)
            case 'token-release':
                self._on_token_release(payload)
            case 'token-grant':
                self._grants[payload['request']] = payload['fence']
            case 'rights-request':
                self._on_rights_request(payload)
            case 'rights-reply':
                self._rights_replies[payload['request']] = (
                    payload['amount'], payload['clock']
                )
            case _:
                raise ValueError(f"Неизвестный тип сообщения '{kind}'.")

    @property
    def idle(self) -> bool:
        """ Нет ожидающих запросов и очередей к токенам """
        return not self._waiting and all(
            not token.queue for token in self.tokens.values()
        )

    def _on_token_request(self, payload: dict):
        key = payload['key']
        token = self.tokens.setdefault(key, SyncToken(key))
        requester = (payload['requester'], payload['request'])
        if token.holder is None:
            self._grant(token, requester)
        else:
            token.queue.append(requester)
            self._emit('token', {
                'event': 'queued', 'key': key, 'request': payload['request'],
                'holder': token.holder[1],
            })

    def _on_token_release(self, payload: dict):
        key = payload['key']
        token = self.tokens.get(key)
        if token is None or token.holder is None \
                or token.holder[1] != payload['request']:
            raise TokenNotHeldError(key, payload['request'])
        if payload['clock'] is not None:
            token.fence = token.fence.join(payload['clock'])
        token.holder = None
        if token.queue:
            self._grant(token, token.queue.popleft())

    def _grant(self, token: SyncToken, requester: tuple[ReplicaId, str]):
        token.holder = requester
        replica, request_id = requester
        self._emit('token', {
            'event': 'grant', 'key': token.key, 'request': request_id,
            'to': replica, 'fence': token.fence,
        })
        if replica == self.replica_id:
            self._grants[request_id] = token.fence
        else:
            self._send(replica, 'token-grant', {
                'request': request_id, 'key': token.key, 'fence': token.fence
            })

    @log_action('TRANSFER')
    def _on_rights_request(self, payload: dict):
        """ Донор передает столько прав, сколько может (не больше запрошенного) """
        key = payload['key']
        requester = payload['requester']
        available = self.replica.current(key).local_rights(self.replica_id)
        amount = min(payload['amount'], max(available, 0))
        clock = None
        if amount > 0:
            session = Session(f'sync-{self.replica_id}')
            txn = self.replica.begin(session)
            txn.update(key, ('transfer', requester, amount))
            clock = txn.commit()
        self._emit('rights', {
            'event': 'reply', 'key': key, 'request': payload['request'],
            'amount': amount, 'clock': clock,
        })
        self._send(requester, 'rights-reply', {
            'request': payload['request'], 'amount': amount, 'clock': clock
        })

    def _next_request(self) -> str:
        self._requests += 1
        return f'{self.replica_id}:{self._requests}'


# Протоколы (генераторы)

def acquire(agent: SyncAgent, key: ObjectKey, owner: str):
    """
    Получает токен объекта. После выдачи ждёт, пока реплика применит
    всё до fence токена. Возвращает HeldToken.
    """
    request_id = agent.request_token(key, owner)
    yield WaitUntil(lambda: agent.granted(request_id), 'token', str(key))
    token = agent.take_grant(key, request_id, owner)
    replica = agent.replica
    yield WaitUntil(lambda: replica.covers(token.fence), 'token', str(key))
    return token


def release(agent: SyncAgent, token: HeldToken, clock: VectorClock | None = None):
    """ Освобождает токен; без фиксации fence не меняется """
    agent.release_token(token, clock)


def run_protected(agent: SyncAgent, session: Session, keys, body, owner: str):
    """
    Выполняет транзакцию в CP-режиме.

    Токены берутся в каноническом порядке ключей, снимок транзакции
    покрывает fence всех токенов. body(txn) - функция или генератор,
    возвращающий результат; незакрытая транзакция фиксируется после body.

    Возвращает:
        (результат body, часы фиксации)
    """
    keys = sorted(set(keys))
    if not keys:
        raise ValueError('Список защищаемых объектов не должен быть пустым.')
    replica = agent.replica
    tokens = []
    for key in keys:
        token = yield from acquire(agent, key, owner)
        tokens.append(token)

    fence = VectorClock.zero()
    for token in tokens:
        fence = fence.join(token.fence)
    required = session.last_seen.join(fence)
    yield WaitUntil(lambda: replica.covers(required), 'session', session.name)

    txn = replica.begin(session, fence, owner)
    clock = None
    try:
        result = body(txn)
        if inspect.isgenerator(result):
            result = yield from result
        if txn.status == 'open':
            clock = replica.commit(txn)
        elif txn.status == 'committed':
            clock = session.last_seen
    except Exception:
        if txn.status == 'open':
            replica.abort(txn)
        for token in reversed(tokens):
            release(agent, token)
        raise
    for token in reversed(tokens):
        release(agent, token, clock)
    return result, clock


def sync_transfer(agent: SyncAgent, key: ObjectKey, amount: int):
    """
    Добирает права счетчика до amount у других реплик.

    Пиры опрашиваются по убыванию известных прав (по локальной копии).
    Возвращает OK или DENIED (все пиры опрошены, прав не хватает).
    При DENIED полученные права возвращаются донорам.
    Под разбиением процесс блокируется.
    """
    replica = agent.replica
    me = replica.id

    def have():
        return replica.current(key).local_rights(me)

    if have() >= amount:
        return OK
    known = replica.current(key)
    peers = sorted(
        (peer for peer in range(agent.n) if peer != me),
        key=lambda peer: (-known.local_rights(peer), peer)
    )
    donations = {}
    for peer in peers:
        missing = amount - have()
        if missing <= 0:
            return OK
        request_id = agent.request_rights(peer, key, missing)
        yield WaitUntil(
            lambda: agent.has_rights_reply(request_id), 'rights', str(key)
        )
        given, clock = agent.take_rights_reply(request_id)
        if given and clock is not None:
            donations[peer] = given
            yield WaitUntil(lambda: replica.covers(clock), 'rights', str(key))
    if have() >= amount:
        return OK
    logger.info(
        f'Реплика {me}: передача прав {key} отклонена, '
        f'доступно {have()}, требуется {amount}'
    )
    for peer, given in donations.items():
        agent.return_rights(key, peer, amount=given)
    return DENIED


def decrement_with_sync(
        agent: SyncAgent,
        session: Session,
        key: ObjectKey,
        amount: int,
        sync: bool = True
):
    """
    Декремент Bounded Counter: сначала из локальной доли (AP),
    при нехватке - через sync_transfer и повтор.

    Возвращает:
        'ok' | 'denied' | 'insufficient' (если sync отключен)
    """
    replica = agent.replica
    for attempt in range(2):
        yield WaitUntil(
            lambda: replica.covers(session.last_seen), 'session', session.name
        )
        txn = replica.begin(session)
        try:
            txn.update(key, ('decrement', amount))
            txn.commit()
            return OK
        except InsufficientRightsError:
            if txn.status == 'open':
                txn.abort()
        if not sync or attempt:
            return 'insufficient'
        outcome = yield from sync_transfer(agent, key, amount)
        if outcome == DENIED:
            return DENIED
    return 'insufficient'
