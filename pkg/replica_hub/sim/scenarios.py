"""
Модуль содержит сценарии симулятора: разбор JSON-описания,
встроенные демонстрации, генератор случайных сценариев и
преобразование контрпримера проверки в сценарий.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from replica_hub.core.bounded_counter import BoundedCounter, new_bounded
from replica_hub.core.exceptions import (
    CounterConfigError,
    ScenarioFormatError,
    UnknownDemoError,
)
from replica_hub.core.models import ObjectKey
from replica_hub.sim.config import PROCESS_MODES, SimConfig
from replica_hub.sim.monitors import build_monitor
from replica_hub.sim.operations import parse_args

STEP_KINDS = ('op', 'partition', 'heal', 'advance', 'assert')
ASSERTIONS = ('converged', 'quiescent', 'value', 'result', 'was-blocked')


@dataclass(frozen=True)
class Step:
    """ Шаг сценария: op | partition | heal | advance | assert """
    kind: str
    args: dict = field(default_factory=dict)


@dataclass
class Scenario:
    """
    Сценарий: число реплик, seed, диапазон задержек, вероятность
    дублирования и упорядоченный список шагов.
    """
    name: str
    replicas: int
    steps: list[Step]
    seed: int | None = None
    delay: tuple[int, int] | None = None
    duplication: float = 0.0
    fifo: bool = False
    process_mode: str = 'best-effort'
    ablations: tuple[str, ...] = ()
    counters: dict[ObjectKey, BoundedCounter] = field(default_factory=dict)
    monitors: list[dict] = field(default_factory=list)
    description: str = ''

    def config(
            self,
            seed: int | None = None,
            ablations=None,
            process_mode: str | None = None
    ) -> SimConfig:
        """ Конфигурация прогона: сценарий + переопределения CLI + настройки """
        delay_min, delay_max = self.delay if self.delay else (None, None)
        return SimConfig.from_settings(
            replicas=self.replicas,
            seed=seed if seed is not None else self.seed,
            delay_min=delay_min,
            delay_max=delay_max,
            duplication=self.duplication,
            fifo=self.fifo,
            ablations=frozenset(
                ablations if ablations is not None else self.ablations
            ),
            process_mode=process_mode or self.process_mode,
        )

    @classmethod
    def from_dict(cls, data: dict, source: str | None = None) -> Scenario:
        """
        Создает сценарий из JSON-совместимого словаря.

        Выбрасывает:
            ScenarioFormatError
        """
        try:
            return cls._from_dict(data)
        except ScenarioFormatError as e:
            raise ScenarioFormatError(e.reason, source)
        except (CounterConfigError, KeyError, TypeError, ValueError) as e:
            raise ScenarioFormatError(str(e), source)

    @classmethod
    def _from_dict(cls, data: dict) -> Scenario:
        if not isinstance(data, dict):
            raise ScenarioFormatError('сценарий должен быть объектом')
        replicas = data.get('replicas')
        if not isinstance(replicas, int) or replicas < 1:
            raise ScenarioFormatError("поле 'replicas' должно быть >= 1")
        delay = data.get('delay')
        if delay is not None:
            if not isinstance(delay, list) or len(delay) != 2 \
                    or not 0 <= delay[0] <= delay[1]:
                raise ScenarioFormatError(
                    "поле 'delay' должно быть [min, max], 0 <= min <= max"
                )
            delay = (int(delay[0]), int(delay[1]))
        process_mode = data.get('process_mode', 'best-effort')
        if process_mode not in PROCESS_MODES:
            raise ScenarioFormatError(f"неизвестный режим '{process_mode}'")

        counters = {}
        for spec in data.get('counters', []):
            key = ObjectKey.from_list(spec['key'])
            if key.type_tag != 'bcounter':
                raise ScenarioFormatError(f'счетчик {key} должен иметь тип bcounter')
            shares = spec['shares']
            if len(shares) != replicas:
                raise ScenarioFormatError(
                    f'у счетчика {key} {len(shares)} долей для {replicas} реплик'
                )
            counters[key] = new_bounded(spec['k'], spec['initial'], shares)

        monitors = list(data.get('monitors', []))
        for spec in monitors:
            build_monitor(spec)

        steps = [
            parse_step(raw, replicas, index)
            for index, raw in enumerate(data.get('steps', []))
        ]
        ids = [step.args['id'] for step in steps
               if step.kind == 'op' and step.args.get('id')]
        if len(ids) != len(set(ids)):
            raise ScenarioFormatError('идентификаторы операций повторяются')

        return cls(
            name=str(data.get('name', 'scenario')),
            replicas=replicas,
            steps=steps,
            seed=data.get('seed'),
            delay=delay,
            duplication=float(data.get('duplication', 0.0)),
            fifo=bool(data.get('fifo', False)),
            process_mode=process_mode,
            ablations=tuple(data.get('ablations', ())),
            counters=counters,
            monitors=monitors,
            description=str(data.get('description', '')),
        )


def parse_step(raw: dict, replicas: int, index: int) -> Step:
    """ Разбирает шаг сценария """
    if not isinstance(raw, dict):
        raise ScenarioFormatError(f'шаг {index} должен быть объектом')
    kinds = [kind for kind in STEP_KINDS if kind in raw]
    if len(kinds) != 1:
        raise ScenarioFormatError(
            f"шаг {index} должен содержать ровно одно из: {', '.join(STEP_KINDS)}"
        )
    kind = kinds[0]
    match kind:
        case 'op':
            replica = raw.get('replica')
            if not isinstance(replica, int) or not 0 <= replica < replicas:
                raise ScenarioFormatError(
                    f'шаг {index}: реплика {replica!r} вне диапазона'
                )
            return Step('op', parse_args(raw['op'], raw, replicas))
        case 'partition':
            groups = raw['partition']
            members = [r for group in groups for r in group]
            if sorted(members) != list(range(replicas)):
                raise ScenarioFormatError(
                    f'шаг {index}: группы {groups} должны разбивать '
                    f'реплики 0..{replicas - 1}'
                )
            return Step('partition', {'groups': [list(g) for g in groups]})
        case 'heal':
            return Step('heal')
        case 'advance':
            ticks = raw['advance']
            if ticks is not None and (not isinstance(ticks, int) or ticks < 0):
                raise ScenarioFormatError(
                    f'шаг {index}: advance должен быть неотрицательным или null'
                )
            return Step('advance', {'ticks': ticks})
        case 'assert':
            assertion = raw['assert']
            if assertion not in ASSERTIONS:
                raise ScenarioFormatError(
                    f"шаг {index}: неизвестное утверждение '{assertion}'. "
                    f"Допустимые: {', '.join(ASSERTIONS)}"
                )
            args = dict(raw)
            if assertion == 'value':
                if not 0 <= args.get('replica', -1) < replicas:
                    raise ScenarioFormatError(f'шаг {index}: неверная реплика')
                args['key'] = ObjectKey.from_list(args['key'])
                if 'equals' not in args:
                    raise ScenarioFormatError(f"шаг {index}: нет поля 'equals'")
            if assertion in ('result', 'was-blocked') and 'id' not in args:
                raise ScenarioFormatError(f"шаг {index}: нет поля 'id'")
            if assertion == 'result' and 'equals' not in args \
                    and 'in' not in args:
                raise ScenarioFormatError(
                    f"шаг {index}: нужно поле 'equals' или 'in'"
                )
            return Step('assert', args)


# Встроенные демонстрации

PASSWORD = ['admin', 'password', 'register']
LOGIN = ['admin', 'login-enabled', 'register']

FMKE_MONITORS = [
    {'type': 'fmke-copies-equal'},
    {'type': 'fmke-referential-integrity'},
    {'type': 'fmke-no-over-delivery'},
]

CREATE_P1 = {
    'op': 'create-prescription', 'replica': 0, 'id': 'create',
    'session': 'alice', 'prescription': 'p1', 'patient': 'bob',
    'doctor': 'alice', 'pharmacy': 'byrum',
}


def password_scenario() -> dict:
    """
    Администратор меняет пароль и включает вход,
    наблюдатель опрашивает другую реплику
    """
    steps = [
        {'op': 'update', 'replica': 0, 'session': 'admin-console', 'id': 'setup',
         'writes': [[PASSWORD, ['assign', '0000']],
                    [LOGIN, ['assign', False]]]},
        {'advance': None},
        {'op': 'update', 'replica': 0, 'session': 'admin-console',
         'id': 'set-password', 'writes': [[PASSWORD, ['assign', 'S3kr3t']]]},
        {'op': 'update', 'replica': 0, 'session': 'admin-console',
         'id': 'enable-login', 'writes': [[LOGIN, ['assign', True]]]},
    ]
    for poll in range(8):
        steps.append({'op': 'read', 'replica': 1, 'session': 'intruder',
                      'id': f'poll-{poll}', 'keys': [LOGIN, PASSWORD]})
        steps.append({'advance': 1})
    steps += [
        {'advance': None},
        {'assert': 'converged'},
        {'assert': 'value', 'replica': 1, 'key': PASSWORD, 'equals': 'S3kr3t'},
    ]
    return {
        'name': 'password',
        'description': 'Причинность: вход не включается раньше смены пароля',
        'replicas': 2,
        'seed': 1,
        'delay': [1, 5],
        'monitors': [{
            'type': 'implication',
            'premise': {'key': LOGIN, 'equals': True},
            'conclusion': {'key': PASSWORD, 'not_equals': '0000'},
        }],
        'steps': steps,
    }


def buggydb2_scenario() -> dict:
    """ Врач добавляет лекарство: копии пациента и аптеки меняются вместе """
    steps = [
        dict(CREATE_P1, meds={'Chamomile': 1}),
        {'advance': None},
        {'op': 'update-prescription-medication', 'replica': 0,
         'session': 'alice', 'id': 'add-aspirin', 'prescription': 'p1',
         'med': 'Aspirin', 'delta': 1},
    ]
    for poll in range(6):
        steps.append({'op': 'read-prescription-copies', 'replica': 1 + poll % 2,
                      'id': f'copies-{poll}', 'prescription': 'p1',
                      'patient': 'bob', 'pharmacy': 'byrum'})
        steps.append({'advance': 1})
    steps += [
        {'op': 'get-pharmacy-prescriptions', 'replica': 2, 'id': 'pharmacy',
         'pharmacy': 'byrum'},
        {'advance': None},
        {'assert': 'result', 'id': 'pharmacy', 'equals': ['p1']},
        {'assert': 'converged'},
    ]
    return {
        'name': 'buggydb2',
        'description': 'Атомарная запись: копии рецепта обновляются вместе',
        'replicas': 3,
        'seed': 2,
        'delay': [1, 5],
        'monitors': FMKE_MONITORS,
        'steps': steps,
    }


def buggydb3_scenario() -> dict:
    """ Транзакция читает две копии с паузой: обе из одного снимка """
    steps = [
        dict(CREATE_P1, meds={'Chamomile': 1}),
        {'advance': None},
    ]
    for round_ in range(3):
        steps += [
            {'op': 'read-prescription-copies', 'replica': 2,
             'id': f'reader-{round_}', 'prescription': 'p1',
             'patient': 'bob', 'pharmacy': 'byrum', 'think': 4},
            {'op': 'update-prescription-medication', 'replica': 0,
             'session': 'alice', 'id': f'add-{round_}', 'prescription': 'p1',
             'med': 'Aspirin', 'delta': 1},
            {'advance': None},
        ]
    steps.append({'assert': 'converged'})
    return {
        'name': 'buggydb3',
        'description': 'Снимок: чтения одной транзакции из одного набора транзакций',
        'replicas': 3,
        'seed': 3,
        'delay': [1, 5],
        'monitors': FMKE_MONITORS,
        'steps': steps,
    }


def duplicate_delivery_scenario() -> dict:
    """ Две аптеки за разбиением выдают последнюю единицу лекарства """
    return {
        'name': 'duplicate-delivery',
        'description': 'Нестабильное предусловие count >= 1 под разбиением',
        'replicas': 2,
        'seed': 4,
        'delay': [1, 3],
        'monitors': FMKE_MONITORS,
        'steps': [
            dict(CREATE_P1, meds={'Aspirin': 1}),
            {'advance': None},
            {'partition': [[0], [1]]},
            {'op': 'process-prescription', 'replica': 0, 'id': 'first',
             'session': 'pharmacist-0', 'prescription': 'p1', 'med': 'Aspirin'},
            {'op': 'process-prescription', 'replica': 1, 'id': 'second',
             'session': 'pharmacist-1', 'prescription': 'p1', 'med': 'Aspirin'},
            {'advance': None},
            {'heal': True},
            {'advance': None},
            {'assert': 'converged'},
        ],
    }


BUDGET = ['budget', 'pharmacy-chain', 'bcounter']


def budget_escrow_scenario() -> dict:
    """ Бюджет с долями аптек: AP-декременты, передача прав, блокировка """
    return {
        'name': 'budget-escrow',
        'description': 'Bounded Counter: локальные доли и синхронная передача прав',
        'replicas': 2,
        'seed': 5,
        'delay': [1, 3],
        'counters': [{'key': BUDGET, 'k': 0, 'initial': 4, 'shares': [2, 2]}],
        'monitors': [{'type': 'bounded-counter-safety'}],
        'steps': [
            {'op': 'bc-decrement', 'replica': 0, 'id': 'local-1',
             'key': BUDGET, 'amount': 1},
            {'op': 'bc-decrement', 'replica': 0, 'id': 'local-2',
             'key': BUDGET, 'amount': 1},
            {'advance': None},
            {'op': 'bc-decrement', 'replica': 0, 'id': 'borrow',
             'key': BUDGET, 'amount': 2},
            {'advance': None},
            {'op': 'bc-decrement', 'replica': 1, 'id': 'exhausted',
             'key': BUDGET, 'amount': 1},
            {'advance': None},
            {'op': 'bc-increment', 'replica': 0, 'id': 'refill',
             'key': BUDGET, 'amount': 2},
            {'advance': None},
            {'partition': [[0], [1]]},
            {'op': 'bc-decrement', 'replica': 1, 'id': 'partitioned',
             'key': BUDGET, 'amount': 1},
            {'advance': None},
            {'assert': 'was-blocked', 'id': 'partitioned'},
            {'heal': True},
            {'advance': None},
            {'assert': 'result', 'id': 'local-1', 'equals': 'ok'},
            {'assert': 'result', 'id': 'local-2', 'equals': 'ok'},
            {'assert': 'result', 'id': 'borrow', 'equals': 'ok'},
            {'assert': 'result', 'id': 'exhausted', 'equals': 'denied'},
            {'assert': 'result', 'id': 'partitioned', 'equals': 'ok'},
            {'assert': 'value', 'replica': 1, 'key': BUDGET, 'equals': 1},
            {'assert': 'converged'},
        ],
    }


@dataclass(frozen=True)
class DemoRun:
    """ Один прогон демонстрации; expect_pass=None - без ожидания """
    label: str
    ablations: tuple[str, ...] = ()
    process_mode: str | None = None
    expect_pass: bool | None = True


@dataclass(frozen=True)
class Demo:
    name: str
    build: object
    runs: tuple[DemoRun, ...]


DEMOS = {
    demo.name: demo for demo in (
        Demo('password', password_scenario, (
            DemoRun('TCC'),
            DemoRun('без причинных зависимостей', ('no-causal-deps',),
                    expect_pass=None),
        )),
        Demo('buggydb2', buggydb2_scenario, (
            DemoRun('TCC'),
            DemoRun('без атомарной записи', ('no-atomic-writes',),
                    expect_pass=False),
        )),
        Demo('buggydb3', buggydb3_scenario, (
            DemoRun('TCC'),
            DemoRun('без снимков', ('no-snapshots',), expect_pass=None),
        )),
        Demo('duplicate-delivery', duplicate_delivery_scenario, (
            DemoRun('best-effort', process_mode='best-effort',
                    expect_pass=False),
            DemoRun('cp', process_mode='cp'),
        )),
        Demo('budget-escrow', budget_escrow_scenario, (DemoRun('TCC'),)),
    )
}


def get_demo(name: str) -> Demo:
    """
    Выбрасывает:
        UnknownDemoError
    """
    try:
        return DEMOS[name]
    except KeyError:
        raise UnknownDemoError(name, list(DEMOS))


def builtin_scenario(name: str) -> Scenario:
    return Scenario.from_dict(get_demo(name).build(), source=f'demo:{name}')


# Случайные сценарии

def random_scenario(
        seed: int,
        replicas: int | None = None,
        ops: int | None = None,
        episodes: int | None = None
) -> Scenario:
    """
    Случайный сценарий для проверки сходимости: 3-5 реплик, 50-200
    операций над всеми типами объектов и 0-3 эпизода разбиения.
    """
    rng = random.Random(seed)
    replicas = replicas or rng.randint(3, 5)
    ops = ops or rng.randint(50, 200)
    episodes = rng.randint(0, 3) if episodes is None else episodes

    registers = [['reg', f'r{i}', 'register'] for i in range(2)]
    counters = [['cnt', f'c{i}', 'counter'] for i in range(2)]
    sets = [['set', f's{i}', 'set'] for i in range(2)]
    maps = [['map', f'm{i}', 'map'] for i in range(2)]
    budget = ['bc', 'budget', 'bcounter']
    elements = ['a', 'b', 'c', 'd']
    fields = ['x', 'y', 'z']

    def random_write():
        kind = rng.choice(['register', 'counter', 'set', 'map', 'map'])
        match kind:
            case 'register':
                return [rng.choice(registers), ['assign', rng.randint(0, 9)]]
            case 'counter':
                return [rng.choice(counters), ['add', rng.randint(-3, 3) or 1]]
            case 'set':
                verb = rng.choice(['add', 'add', 'remove'])
                return [rng.choice(sets), [verb, rng.choice(elements)]]
            case 'map':
                key = rng.choice(maps)
                field_name = rng.choice(fields)
                if rng.random() < 0.2:
                    return [key, ['remove', field_name]]
                nested = rng.choice([
                    ['update', field_name, 'counter', ['add', 1]],
                    ['update', field_name, 'set',
                     [rng.choice(['add', 'remove']), rng.choice(elements)]],
                    ['update', field_name, 'register',
                     ['assign', rng.randint(0, 9)]],
                ])
                return [key, nested]

    # точки разбиений и восстановлений
    cuts = sorted(rng.sample(range(1, ops), min(2 * episodes, ops - 1)))
    partition_at = set(cuts[0::2])
    heal_at = set(cuts[1::2])

    steps = []
    partitioned = False
    for index in range(ops):
        if index in partition_at and not partitioned:
            members = list(range(replicas))
            rng.shuffle(members)
            split = rng.randint(1, replicas - 1)
            groups = [sorted(members[:split]), sorted(members[split:])]
            if replicas > 3 and rng.random() < 0.3:
                groups = [sorted(members[:1]), sorted(members[1:split + 1]),
                          sorted(members[split + 1:])]
                groups = [g for g in groups if g]
            steps.append({'partition': groups})
            partitioned = True
        if index in heal_at and partitioned:
            steps.append({'heal': True})
            partitioned = False

        replica = rng.randrange(replicas)
        roll = rng.random()
        if roll < 0.15:
            keys = rng.sample(registers + counters + sets + maps, 2)
            steps.append({'op': 'read', 'replica': replica, 'keys': keys})
        elif roll < 0.22:
            choice = rng.random()
            if choice < 0.4:
                steps.append({'op': 'bc-increment', 'replica': replica,
                              'key': budget, 'amount': rng.randint(1, 2)})
            elif choice < 0.8:
                steps.append({'op': 'bc-decrement', 'replica': replica,
                              'key': budget, 'amount': 1, 'sync': False})
            else:
                target = (replica + rng.randint(1, replicas - 1)) % replicas
                steps.append({'op': 'bc-transfer', 'replica': replica,
                              'key': budget, 'to': target, 'amount': 1})
        else:
            writes = [random_write() for _ in range(rng.randint(1, 3))]
            steps.append({'op': 'update', 'replica': replica, 'writes': writes})
        if rng.random() < 0.5:
            steps.append({'advance': rng.randint(0, 3)})

    if partitioned:
        steps.append({'heal': True})
    steps += [{'advance': None}, {'assert': 'converged'}]

    return Scenario.from_dict({
        'name': f'random-{seed}',
        'replicas': replicas,
        'seed': seed,
        'delay': [1, 5],
        'duplication': rng.choice([0.0, 0.0, 0.1]),
        'counters': [{'key': budget, 'k': 0, 'initial': 2 * replicas,
                      'shares': [2] * replicas}],
        'monitors': [{'type': 'bounded-counter-safety'}],
        'steps': steps,
    }, source=f'random:{seed}')


# Контрпримеры проверки

def counterexample_to_scenario(counterexample, process_mode: str = 'best-effort'):
    """
    Переводит контрпример проверки стабильности модели FMKe в сценарий:
    рецепт с count из состояния контрпримера, разбиение на две реплики
    и две конкурентные операции по разные стороны.

    Выбрасывает:
        ScenarioFormatError - операции контрпримера не из модели FMKe
    """
    count = counterexample.state.get('count')
    if not count or counterexample.second is None:
        raise ScenarioFormatError(
            'контрпример должен содержать состояние с count > 0 и две операции'
        )
    steps = [
        dict(CREATE_P1, meds={'Aspirin': count}),
        {'advance': None},
        {'partition': [[0], [1]]},
    ]
    for replica, (label, instance) in enumerate(
            (('first', counterexample.first), ('second', counterexample.second))
    ):
        steps.append(_fmke_step(instance, replica, label))
    steps += [{'advance': None}, {'heal': True}, {'advance': None},
              {'assert': 'converged'}]
    return Scenario.from_dict({
        'name': 'counterexample',
        'description': str(counterexample),
        'replicas': 2,
        'seed': 0,
        'delay': [1, 3],
        'process_mode': process_mode,
        'monitors': FMKE_MONITORS,
        'steps': steps,
    }, source='counterexample')


def _fmke_step(instance, replica: int, label: str) -> dict:
    base = {'replica': replica, 'id': label, 'session': f'client-{label}',
            'prescription': 'p1'}
    match instance.name:
        case 'process-prescription':
            return dict(base, op='process-prescription', med='Aspirin',
                        n=instance.params.get('n', 1))
        case 'update-prescription-medication':
            return dict(base, op='update-prescription-medication',
                        med='Aspirin', delta=instance.params.get('d', 1))
        case 'get-staff-prescriptions':
            return {'op': 'get-staff-prescriptions', 'replica': replica,
                    'id': label, 'staff': 'alice'}
        case 'get-pharmacy-prescriptions':
            return {'op': 'get-pharmacy-prescriptions', 'replica': replica,
                    'id': label, 'pharmacy': 'byrum'}
        case other:
            raise ScenarioFormatError(
                f"операция '{other}' не воспроизводится в сценарии FMKe"
            )
