"""
Модуль содержит исполнитель сценариев: реплики, агенты синхронизации,
клиентские процессы-генераторы и детерминированную трассу.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Any

from replica_hub.core.exceptions import NotQuiescentError, ReplicaHubError
from replica_hub.core.models import Session
from replica_hub.core.store import Replica
from replica_hub.core.sync import Sleep, SyncAgent, WaitUntil
from replica_hub.core.usecases import AppConfig, Client, FmkeCommands
from replica_hub.core.utils import canonical, to_plain
from replica_hub.sim.config import SimConfig
from replica_hub.sim.monitors import NoOverDeliveryMonitor, build_monitor
from replica_hub.sim.network import EventQueue, Message, Network
from replica_hub.sim.operations import OPERATIONS, OpContext

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceEvent:
    """ Событие трассы: время, реплика, категория, полезная нагрузка """
    time: int
    replica: int | None
    category: str
    payload: Any

    def encode(self) -> str:
        return canonical({
            't': self.time, 'r': self.replica,
            'cat': self.category, 'payload': self.payload,
        })


class Process:
    """ Клиентский процесс: генератор операции и его состояние ожидания """
    def __init__(self, pid: str, name: str, replica: int, generator):
        self.pid = pid
        self.name = name
        self.replica = replica
        self.generator = generator
        self.wait: WaitUntil | None = None
        self.blocked = False
        self.blocked_reasons: list[str] = []
        self.done = False
        self.result = None

    @property
    def was_blocked(self) -> bool:
        return bool(self.blocked_reasons)


@dataclass
class RunResult:
    """ Итог прогона сценария """
    name: str
    trace: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)
    blocked: dict[str, list[str]] = field(default_factory=dict)
    quiescent: bool = True
    converged: bool | None = None

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self):
        return {
            'name': self.name,
            'passed': self.passed,
            'failures': self.failures,
            'results': self.results,
            'blocked': self.blocked,
            'quiescent': self.quiescent,
            'converged': self.converged,
        }


class Simulation:
    """
    Класс симуляции одного сценария.

    Сценарий исполняется шагами; события обрабатываются в порядке
    (time, seq). После каждого события проверяются ожидающие процессы,
    инварианты хранилища и мониторы.
    """
    def __init__(self, scenario, config: SimConfig, record_trace: bool = True):
        self.scenario = scenario
        self.config = config
        self.record_trace = record_trace
        self.now = 0
        self.rng = random.Random(config.seed)
        self.queue = EventQueue()
        self.network = Network(
            config.replicas, self.queue, self.rng,
            config.delay_min, config.delay_max,
            config.duplication, config.fifo
        )
        self.trace: list[TraceEvent] = []
        self.failures: list[str] = []
        self._failure_set: set[str] = set()
        self.replicas: list[Replica] = []
        self.agents: list[SyncAgent] = []
        for replica_id in range(config.replicas):
            replica = Replica(
                replica_id, config.replicas,
                counters=scenario.counters,
                ablations=config.ablations,
                send=self._broadcaster(replica_id),
                emit=self._emitter(replica_id)
            )
            agent = SyncAgent(
                replica, config.replicas,
                send=self._sender(replica_id),
                emit=self._emitter(replica_id)
            )
            self.replicas.append(replica)
            self.agents.append(agent)
        self.sessions: dict[str, Session] = {}
        self.processes: dict[str, Process] = {}
        self.app = FmkeCommands(AppConfig(config.process_mode))
        self.ledger = NoOverDeliveryMonitor()
        self.monitors = []
        for spec in scenario.monitors:
            monitor = build_monitor(spec)
            if isinstance(monitor, NoOverDeliveryMonitor):
                monitor = self.ledger
            self.monitors.append(monitor)
        self._delivered_ids: set[int] = set()
        self._waiting: dict[str, Process] = {}
        self._violations_seen = [0] * config.replicas

    # Трасса и ошибки

    def emit(self, replica: int | None, category: str, payload):
        if self.record_trace:
            self.trace.append(
                TraceEvent(self.now, replica, category, to_plain(payload))
            )

    def fail(self, message: str):
        if message in self._failure_set:
            return
        self._failure_set.add(message)
        self.failures.append(message)
        self.emit(None, 'failure', {'message': message})
        logger.info(f'[{self.scenario.name}] t={self.now}: {message}')

    def _emitter(self, replica_id: int):
        return lambda category, payload: self.emit(replica_id, category, payload)

    def _broadcaster(self, replica_id: int):
        def send(record):
            for dst in range(self.config.replicas):
                if dst != replica_id:
                    message = self.network.new_message('txn', replica_id, dst,
                                                       record)
                    self.network.schedule(message, self.now)
        return send

    def _sender(self, replica_id: int):
        def send(dst, kind, payload):
            message = self.network.new_message(kind, replica_id, dst, payload)
            self.network.schedule(message, self.now)
        return send

    # Запуск

    def run(self) -> RunResult:
        """ Исполняет все шаги сценария и доводит систему до покоя """
        for index, step in enumerate(self.scenario.steps):
            self.execute(step, index)
        self.advance(None)
        self._check_totals()
        result = RunResult(
            name=self.scenario.name,
            trace=[event.encode() for event in self.trace],
            failures=list(self.failures),
            results={pid: to_plain(p.result) for pid, p in self.processes.items()},
            blocked={
                pid: list(p.blocked_reasons)
                for pid, p in self.processes.items() if p.was_blocked
            },
            quiescent=self.quiescent(),
        )
        if result.quiescent:
            result.converged = self.check_convergence()
        return result

    def execute(self, step, index: int):
        """ Выполняет один шаг сценария """
        match step.kind:
            case 'op':
                self.start(step, index)
            case 'partition':
                self.network.partition(step.args['groups'])
                self.emit(None, 'partition', {'groups': step.args['groups']})
            case 'heal':
                flushed = self.network.heal(self.now)
                self.emit(None, 'heal', {'flushed': flushed})
                self._poll_waiting()
            case 'advance':
                self.advance(step.args.get('ticks'))
            case 'assert':
                self.check_assertion(step.args)

    def start(self, step, index: int):
        """ Запускает клиентский процесс операции """
        args = step.args
        pid = args.get('id') or f'op{index}'
        replica_id = args['replica']
        session_name = args.get('session') or f'client-{replica_id}'
        session = self.sessions.setdefault(session_name, Session(session_name))
        client = Client(
            self.replicas[replica_id], self.agents[replica_id], session, pid,
            observer=self._observe
        )
        context = OpContext(client, self.app, self.ledger)
        spec = OPERATIONS[args['op']]
        process = Process(pid, args['op'], replica_id,
                          spec.run(context, args))
        self.processes[pid] = process
        self.emit(replica_id, 'op', {'id': pid, 'op': args['op'],
                                     'session': session_name})
        self._resume(process)
        self._after_event()

    def advance(self, ticks: int | None):
        """
        Обрабатывает события до now + ticks; без ticks - пока очередь
        не опустеет. Если очередь пуста, ожидающие процессы блокированы.
        """
        deadline = None if ticks is None else self.now + ticks
        while self.queue:
            next_time = self.queue.peek_time()
            if deadline is not None and next_time > deadline:
                break
            if next_time > self.config.max_ticks:
                self.fail(f'превышен горизонт симуляции {self.config.max_ticks}')
                self.queue = EventQueue()
                self.network.queue = self.queue
                break
            event = self.queue.pop()
            self.now = max(self.now, event.time)
            self._dispatch(event)
            self._after_event()
        if not self.queue:
            self._mark_blocked()
        if deadline is not None:
            self.now = max(self.now, deadline)

    # События

    def _dispatch(self, event):
        try:
            match event.kind:
                case 'deliver':
                    self._deliver(event.data)
                case 'wake':
                    self._resume(self.processes[event.data])
        except ReplicaHubError as e:
            self.fail(f'сбой при обработке события {event.kind}: '
                      f'{type(e).__name__}: {e}')

    def _deliver(self, message: Message):
        if not self.network.connected(message.src, message.dst):
            self.network.park(message)
            return
        if message.kind == 'txn':
            self.replicas[message.dst].receive(message.payload)
            return
        if message.msg_id in self._delivered_ids:
            self.emit(message.dst, 'duplicate', message)
            return
        self._delivered_ids.add(message.msg_id)
        self.emit(message.dst, 'message', message)
        self.agents[message.dst].handle(message.kind, message.payload)

    def _after_event(self):
        self._poll_waiting()
        self._check_store_invariants()
        self._check_monitors()

    def _resume(self, process: Process, value=None):
        """ Продвигает процесс до следующей команды ожидания """
        while True:
            try:
                command = process.generator.send(value)
            except StopIteration as stop:
                self._finish(process, stop.value)
                return
            except (ReplicaHubError, ValueError) as e:
                self._finish(process, {'error': type(e).__name__,
                                       'message': str(e)})
                return
            value = None
            match command:
                case Sleep(ticks=ticks):
                    self.queue.push(self.now + max(ticks, 0), 'wake',
                                    process.pid)
                    return
                case WaitUntil() if command.predicate():
                    continue
                case WaitUntil():
                    process.wait = command
                    self._waiting[process.pid] = process
                    return
                case _:
                    raise TypeError(f'Неизвестная команда процесса: {command!r}')

    def _finish(self, process: Process, result):
        process.done = True
        process.wait = None
        process.result = result
        self.emit(process.replica, 'result', {'id': process.pid,
                                              'result': result})

    def _poll_waiting(self):
        progress = True
        while progress:
            progress = False
            for pid in sorted(self._waiting):
                process = self._waiting.get(pid)
                if process is None or not process.wait.predicate():
                    continue
                if process.blocked:
                    process.blocked = False
                    self.emit(process.replica, 'unblocked', {'id': pid})
                process.wait = None
                del self._waiting[pid]
                self._resume(process)
                progress = True

    def _mark_blocked(self):
        for pid in sorted(self._waiting):
            process = self._waiting[pid]
            if process.blocked:
                continue
            process.blocked = True
            process.blocked_reasons.append(process.wait.reason)
            self.emit(process.replica, 'blocked', {
                'id': pid, 'reason': process.wait.reason,
                'detail': process.wait.detail,
            })

    def _observe(self, observation: dict):
        view = observation['view']
        self.emit(observation['replica'], 'observe', {
            'txn': observation['txn'],
            'view': {str(key): value for key, value in view.items()},
        })
        for monitor in self.monitors:
            for violation in monitor.check_observation(view):
                self.fail(
                    f"{monitor.name}: чтение {observation['txn']} "
                    f"на реплике {observation['replica']}: {violation}"
                )

    def _check_store_invariants(self):
        for replica in self.replicas:
            seen = self._violations_seen[replica.id]
            for violation in replica.violations[seen:]:
                self.fail(f'хранилище, реплика {replica.id}: {violation}')
            self._violations_seen[replica.id] = len(replica.violations)

    def _check_monitors(self):
        for monitor in self.monitors:
            for replica in self.replicas:
                for violation in monitor.check_state(replica):
                    self.fail(
                        f'{monitor.name}: реплика {replica.id}: {violation}'
                    )

    def _check_totals(self):
        if self.ledger in self.monitors:
            for violation in self.ledger.check_totals():
                self.fail(f'{self.ledger.name}: {violation}')

    # Утверждения

    def check_assertion(self, args: dict):
        kind = args['assert']
        ok, detail = True, ''
        match kind:
            case 'quiescent':
                ok = self.quiescent()
                detail = 'система не в покое'
            case 'converged':
                if not self.quiescent():
                    ok, detail = False, 'проверка сходимости вне покоя'
                else:
                    ok = self.check_convergence()
                    detail = 'состояния реплик различаются'
            case 'value':
                actual = to_plain(self.replicas[args['replica']].value(args['key']))
                expected = to_plain(args['equals'])
                ok = _same(actual, expected)
                detail = f"{args['key']} на реплике {args['replica']}: " \
                         f"{actual!r} != {expected!r}"
            case 'result':
                process = self.processes.get(args['id'])
                actual = to_plain(process.result) if process else None
                if 'in' in args:
                    ok = any(_same(actual, option) for option in args['in'])
                else:
                    ok = _same(actual, to_plain(args['equals']))
                detail = f"результат {args['id']}: {actual!r}"
            case 'was-blocked':
                process = self.processes.get(args['id'])
                expected = args.get('expected', True)
                actual = bool(process and process.was_blocked)
                ok = actual == expected
                detail = f"{args['id']} блокирован: {actual}, ожидалось {expected}"
        self.emit(None, 'assert', {'assert': kind, 'ok': ok})
        if not ok:
            self.fail(f'утверждение {kind} не выполнено: {detail}')

    # Покой и сходимость

    def quiescent(self) -> bool:
        """
        Покой: очередь событий пуста, нет запаркованных сообщений,
        нет недоставленных записей и ожидающих процессов.
        """
        return (
            not self.queue
            and not self.network.parked
            and all(not replica.pending for replica in self.replicas)
            and all(agent.idle for agent in self.agents)
            and not self._waiting
        )

    def check_convergence(self) -> bool:
        """
        Выбрасывает:
            NotQuiescentError - если система не в покое
        """
        if not self.quiescent():
            raise NotQuiescentError()
        digests = {canonical(r.state_digest()) for r in self.replicas}
        return len(digests) == 1


def _same(actual, expected) -> bool:
    if isinstance(actual, list) and isinstance(expected, list):
        return sorted(map(canonical, actual)) == sorted(map(canonical, expected))
    return actual == expected


def run_scenario(scenario, config: SimConfig | None = None,
                 record_trace: bool = True) -> RunResult:
    """ Создает симуляцию сценария и исполняет её """
    config = config or scenario.config()
    return Simulation(scenario, config, record_trace).run()
