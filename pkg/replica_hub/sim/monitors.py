"""
Модуль содержит мониторы - именованные проверки инвариантов приложения.

Монитор проверяет:
    - состояние каждой реплики после каждого события симулятора;
    - каждое клиентское наблюдение (всё прочитанное одной транзакцией).
Возвращаемые строки - нарушения.
"""

from replica_hub.core.exceptions import ScenarioFormatError
from replica_hub.core.models import ObjectKey
from replica_hub.core.usecases import PrescriptionKeying
from replica_hub.core.utils import to_plain


class Monitor:
    """ Базовый класс монитора """
    name = 'monitor'

    def check_state(self, replica) -> list[str]:
        return self.check_view(
            {key: replica.value(key) for key in replica.cache}, complete=True
        )

    def check_observation(self, view: dict) -> list[str]:
        return self.check_view(view, complete=False)

    def check_view(self, view: dict, complete: bool) -> list[str]:
        return []


class ImplicationMonitor(Monitor):
    """
    Запрещает сочетание: premise == значение  =>  conclusion != значение.
    Пример: вход администратора разрешён => пароль не равен "0000".
    """
    name = 'implication'

    def __init__(self, premise_key, premise_value, conclusion_key, forbidden):
        self.premise_key = premise_key
        self.premise_value = premise_value
        self.conclusion_key = conclusion_key
        self.forbidden = forbidden

    def check_view(self, view, complete):
        if self.premise_key not in view or self.conclusion_key not in view:
            return []
        premise = to_plain(view[self.premise_key])
        conclusion = to_plain(view[self.conclusion_key])
        if premise == self.premise_value and conclusion == self.forbidden:
            return [
                f'{self.premise_key} = {premise!r}, '
                f'но {self.conclusion_key} = {conclusion!r}'
            ]
        return []


def _prescription_copies(view: dict) -> dict[str, list[tuple[str, dict]]]:
    """ Все копии medications каждого рецепта, видимые в view """
    copies: dict[str, list] = {}
    for key, value in view.items():
        if not isinstance(value, dict):
            continue
        if key.bucket == PrescriptionKeying.PRESCRIPTIONS:
            if 'id' in value:
                copies.setdefault(key.key, []).append(
                    (str(key), value.get('medications', {}))
                )
        elif key.bucket in PrescriptionKeying.HOLDERS:
            for pid, copy in value.get('prescriptions', {}).items():
                copies.setdefault(pid, []).append(
                    (str(key), copy.get('medications', {}))
                )
    return copies


class CopiesEqualMonitor(Monitor):
    """ Все копии рецепта (в записи и у пациента/врача/аптеки) равны """
    name = 'fmke-copies-equal'

    def check_view(self, view, complete):
        violations = []
        for pid, copies in sorted(_prescription_copies(view).items()):
            first_key, first = copies[0]
            for other_key, other in copies[1:]:
                if other != first:
                    violations.append(
                        f'рецепт {pid}: {first_key} = {first}, '
                        f'{other_key} = {other}'
                    )
        return violations


class ReferentialIntegrityMonitor(Monitor):
    """ Каждая ссылка на рецепт ведёт на инициализированную запись """
    name = 'fmke-referential-integrity'

    def check_view(self, view, complete):
        violations = []
        for key, value in sorted(view.items()):
            if key.bucket not in PrescriptionKeying.HOLDERS \
                    or not isinstance(value, dict):
                continue
            for pid in sorted(value.get('prescriptions', {})):
                record_key = PrescriptionKeying.prescription(pid)
                if record_key not in view and not complete:
                    continue
                if 'id' not in view.get(record_key, {}):
                    violations.append(
                        f'{key} ссылается на неинициализированный {record_key}'
                    )
        return violations


class NoOverDeliveryMonitor(Monitor):
    """
    Выдано не больше, чем назначено: для каждого (рецепт, лекарство)
    сумма выдач <= сумма назначений. Учёт ведёт симулятор по результатам.
    """
    name = 'fmke-no-over-delivery'

    def __init__(self):
        self.prescribed: dict[tuple[str, str], int] = {}
        self.delivered: dict[tuple[str, str], int] = {}

    def record_prescribed(self, pid: str, med: str, amount: int):
        item = (pid, med)
        self.prescribed[item] = self.prescribed.get(item, 0) + amount

    def record_delivered(self, pid: str, med: str, amount: int):
        item = (pid, med)
        self.delivered[item] = self.delivered.get(item, 0) + amount

    def check_totals(self) -> list[str]:
        return [
            f'рецепт {pid}, {med}: выдано {amount}, '
            f'назначено {self.prescribed.get((pid, med), 0)}'
            for (pid, med), amount in sorted(self.delivered.items())
            if amount > self.prescribed.get((pid, med), 0)
        ]


class BoundedCounterSafetyMonitor(Monitor):
    """ value >= k и собственные права реплики неотрицательны """
    name = 'bounded-counter-safety'

    def check_state(self, replica):
        violations = []
        for key, state in sorted(replica.cache.items()):
            if key.type_tag != 'bcounter':
                continue
            if state.value() < state.k:
                violations.append(
                    f'{key}: значение {state.value()} меньше k={state.k}'
                )
            if state.local_rights(replica.id) < 0:
                violations.append(
                    f'{key}: отрицательные права реплики {replica.id}'
                )
        return violations


MONITOR_TYPES = (
    'implication',
    CopiesEqualMonitor.name,
    ReferentialIntegrityMonitor.name,
    NoOverDeliveryMonitor.name,
    BoundedCounterSafetyMonitor.name,
)


def build_monitor(spec: dict) -> Monitor:
    """
    Создает монитор из описания сценария.

    Выбрасывает:
        ScenarioFormatError
    """
    if not isinstance(spec, dict) or 'type' not in spec:
        raise ScenarioFormatError(f'описание монитора без поля type: {spec}')
    try:
        match spec['type']:
            case 'implication':
                premise = spec['premise']
                conclusion = spec['conclusion']
                return ImplicationMonitor(
                    ObjectKey.from_list(premise['key']), premise['equals'],
                    ObjectKey.from_list(conclusion['key']),
                    conclusion['not_equals']
                )
            case 'fmke-copies-equal':
                return CopiesEqualMonitor()
            case 'fmke-referential-integrity':
                return ReferentialIntegrityMonitor()
            case 'fmke-no-over-delivery':
                return NoOverDeliveryMonitor()
            case 'bounded-counter-safety':
                return BoundedCounterSafetyMonitor()
            case other:
                raise ScenarioFormatError(
                    f"неизвестный монитор '{other}'. "
                    f"Допустимые: {', '.join(MONITOR_TYPES)}"
                )
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioFormatError(f'монитор {spec}: {e}')
