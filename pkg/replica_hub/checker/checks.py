"""
Модуль содержит ограниченную исчерпывающую проверку приложения
по трём условиям:
    individual  - каждая операция сама по себе сохраняет инварианты;
    convergence - конкурентные операции дают одно состояние в любом порядке;
    stability   - предусловие операции не отменяется конкурентной операцией,
                  если пара не объявлена синхронизированной.

Перебор идёт по всем состояниям конечных доменов, в которых выполнены
инварианты. Вердикт действителен только в пределах доменов модели.
Допустимым значением параметра считается любое значение из его домена.
"""

import logging
from dataclasses import dataclass, field

from replica_hub.checker.model import AppModel, OpInstance, plain_state
from replica_hub.core.exceptions import StateSpaceTooLargeError
from replica_hub.decorators import format_log
from replica_hub.infra.settings import get_settings

logger = logging.getLogger(__name__)

CHECKS = ('individual', 'convergence', 'stability')
PASS, FAIL = 'pass', 'fail'

CHECK_TITLES = {
    'individual': 'индивидуальная корректность',
    'convergence': 'сходимость',
    'stability': 'стабильность предусловий',
}


@dataclass(frozen=True)
class Counterexample:
    """
    Контрпример: состояние, одна или две операции и нарушенный предикат.
    В проверке стабильности second - конкурентная операция, после
    которой предусловие first ложно.
    """
    check: str
    state: dict
    first: OpInstance
    second: OpInstance | None
    violated: str
    detail: str = ''

    def to_dict(self):
        return {
            'check': self.check,
            'state': plain_state(self.state),
            'first': self.first.to_dict(),
            'second': self.second.to_dict() if self.second else None,
            'violated': self.violated,
            'detail': self.detail,
        }

    def __str__(self):
        state = ', '.join(
            f'{name}={value!r}' for name, value in plain_state(self.state).items()
        )
        ops = str(self.first)
        if self.second is not None:
            ops += f' || {self.second}'
        text = f'[{self.check}] {{{state}}}: {ops} -> нарушено {self.violated}'
        if self.detail:
            text += f' ({self.detail})'
        return text


@dataclass
class CheckResult:
    """ Результат одной проверки """
    check: str
    counterexamples: list[Counterexample] = field(default_factory=list)
    examined: int = 0

    @property
    def verdict(self) -> str:
        return FAIL if self.counterexamples else PASS

    def to_dict(self):
        return {
            'verdict': self.verdict,
            'examined': self.examined,
            'counterexamples': [c.to_dict() for c in self.counterexamples],
        }


@dataclass
class CheckReport:
    """
    Отчёт проверки модели.

    Атрибуты:
        model - имя модели
        bound - описание перебранных доменов
        strict - режим строгой проверки стабильности
        results - результат по каждой выполненной проверке
    """
    model: str
    bound: str
    strict: bool = False
    results: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.verdict == PASS for r in self.results.values())

    @property
    def verdicts(self) -> dict[str, str]:
        return {name: r.verdict for name, r in self.results.items()}

    @property
    def failing_checks(self) -> list[str]:
        return [name for name, r in self.results.items() if r.verdict == FAIL]

    @property
    def counterexamples(self) -> list[Counterexample]:
        return [c for r in self.results.values() for c in r.counterexamples]

    def suggested_sync_pairs(self) -> list[tuple[str, str]]:
        """ Пары операций из контрпримеров стабильности """
        pairs = []
        for example in self.results.get('stability', CheckResult('')).\
                counterexamples:
            pair = tuple(sorted((example.first.name, example.second.name)))
            if pair not in pairs:
                pairs.append(pair)
        return pairs

    def merge(self, other: 'CheckReport') -> 'CheckReport':
        self.results.update(other.results)
        return self

    def to_dict(self):
        return {
            'model': self.model,
            'scope': self.bound,
            'strict': self.strict,
            'passed': self.passed,
            'checks': {name: r.to_dict() for name, r in self.results.items()},
            'suggested_sync_pairs': [list(p) for p in self.suggested_sync_pairs()],
        }

    def render(self, limit: int = 5) -> str:
        """ Человекочитаемый отчёт """
        lines = [f"Модель '{self.model}'", f'Область перебора: {self.bound}']
        for name, result in self.results.items():
            verdict = 'OK' if result.verdict == PASS else 'FAIL'
            lines.append(
                f'  {CHECK_TITLES[name]}: {verdict} в пределах области '
                f'(проверено комбинаций: {result.examined})'
            )
            for example in result.counterexamples[:limit]:
                lines.append(f'    {example}')
            hidden = len(result.counterexamples) - limit
            if hidden > 0:
                lines.append(f'    ... ещё контрпримеров: {hidden}')
        for first, second in self.suggested_sync_pairs():
            lines.append(f'  Предлагается синхронизировать: ({first}, {second})')
        lines.append(
            'Итог: ' + ('проверка пройдена в пределах области'
                        if self.passed else 'найдены контрпримеры')
        )
        return '\n'.join(lines)


def _guard(model: AppModel, cap: int | None):
    """
    Выбрасывает:
        StateSpaceTooLargeError - оценка числа комбинаций больше лимита
    """
    if cap is None:
        cap = get_settings().get('max_states')
    estimate = model.estimate()
    if estimate > cap:
        raise StateSpaceTooLargeError(estimate, cap)


def _invariant_states(model: AppModel):
    for state in model.states():
        if model.holds(state):
            yield state, model.lift(state)


def _sort(model: AppModel, examples: list[Counterexample]):
    examples.sort(key=lambda c: (
        model.state_key(c.state),
        model.instance_key(c.first),
        model.instance_key(c.second) if c.second else (),
    ))


def _report(model: AppModel, result: CheckResult, strict=False) -> CheckReport:
    _sort(model, result.counterexamples)
    logger.info(format_log(
        'CHECK', key=model.name,
        result='OK' if result.verdict == PASS else 'FAIL',
        verbose={'check': result.check,
                 'counterexamples': len(result.counterexamples)}
    ))
    return CheckReport(model.name, model.bound(), strict,
                       {result.check: result})


def check_individual(model: AppModel, cap: int | None = None) -> CheckReport:
    """
    Для каждого состояния с инвариантом и каждой операции с истинным
    предусловием инварианты выполняются после эффекта.
    """
    _guard(model, cap)
    result = CheckResult('individual')
    for state, rich in _invariant_states(model):
        for op, instance in model.instances():
            if not op.enabled(state, instance):
                continue
            result.examined += 1
            after = model.project(
                model.apply(rich, model.prepare(op, instance, rich, 1))
            )
            for name in model.broken(after):
                result.counterexamples.append(Counterexample(
                    'individual', state, instance, None, name,
                    f'после операции: {plain_state(after)}'
                ))
    return _report(model, result)


def check_convergence(model: AppModel, cap: int | None = None) -> CheckReport:
    """
    Для пар конкурентных операций с истинными предусловиями
    применение эффектов в двух порядках даёт одно состояние.
    """
    _guard(model, cap)
    result = CheckResult('convergence')
    instances = model.instances()
    for state, rich in _invariant_states(model):
        for i, (op1, first) in enumerate(instances):
            if not op1.enabled(state, first):
                continue
            for op2, second in instances[i:]:
                if not model.concurrent(op1.name, op2.name) \
                        or not op2.enabled(state, second):
                    continue
                result.examined += 1
                effect1 = model.prepare(op1, first, rich, 1)
                effect2 = model.prepare(op2, second, rich, 2)
                forward = model.project(
                    model.apply(model.apply(rich, effect1), effect2)
                )
                backward = model.project(
                    model.apply(model.apply(rich, effect2), effect1)
                )
                if forward != backward:
                    result.counterexamples.append(Counterexample(
                        'convergence', state, first, second, 'convergence',
                        f'{plain_state(forward)} != {plain_state(backward)}'
                    ))
    return _report(model, result)


def check_stability(
        model: AppModel,
        strict: bool = False,
        cap: int | None = None
) -> CheckReport:
    """
    Для упорядоченных пар несинхронизированных конкурентных операций:
    предусловие first выполняется и после эффекта second.

    Контрпример фиксируется, если предусловие отменено и эффект first,
    применённый следом, нарушает инвариант. В строгом режиме - при
    любой отмене предусловия.
    """
    _guard(model, cap)
    result = CheckResult('stability')
    instances = model.instances()
    for state, rich in _invariant_states(model):
        for op1, first in instances:
            if not op1.enabled(state, first):
                continue
            for op2, second in instances:
                if model.synchronised(op1.name, op2.name) \
                        or not model.concurrent(op1.name, op2.name) \
                        or not op2.enabled(state, second):
                    continue
                result.examined += 1
                effect2 = model.prepare(op2, second, rich, 2)
                moved = model.apply(rich, effect2)
                if op1.enabled(model.project(moved), first):
                    continue
                effect1 = model.prepare(op1, first, rich, 1)
                after = model.project(model.apply(moved, effect1))
                broken = model.broken(after)
                if not broken and not strict:
                    continue
                result.counterexamples.append(Counterexample(
                    'stability', state, first, second,
                    ', '.join(broken) or f'pre({first.name})',
                    f'после обеих операций: {plain_state(after)}'
                ))
    return _report(model, result, strict)


def check_all(
        model: AppModel,
        strict: bool = False,
        cap: int | None = None
) -> CheckReport:
    """ Все три проверки; контрпримеры каждой сохраняются в отчёте """
    _guard(model, cap)
    report = check_individual(model, cap)
    report.merge(check_convergence(model, cap))
    report.merge(check_stability(model, strict, cap))
    report.strict = strict
    return report
