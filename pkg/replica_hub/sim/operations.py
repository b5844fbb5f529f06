"""
Модуль содержит реестр клиентских операций сценариев.

Каждая операция - генератор (ctx, args) -> результат; аргументы
проверяются и разбираются при загрузке сценария (parse_args).
"""

from dataclasses import dataclass
from typing import Any, Callable

from replica_hub.core.exceptions import (
    InsufficientRightsError,
    ScenarioFormatError,
    TokenConflictError,
)
from replica_hub.core.models import ObjectKey
from replica_hub.core.sync import Sleep, decrement_with_sync, run_protected
from replica_hub.core.usecases import DELIVERED, Client, FmkeCommands
from replica_hub.core.utils import to_plain
from replica_hub.sim.monitors import NoOverDeliveryMonitor


@dataclass
class OpContext:
    """ Окружение операции: клиент, приложение FMKe и учёт выдач """
    client: Client
    app: FmkeCommands
    ledger: NoOverDeliveryMonitor


def to_op(obj):
    """ Приводит JSON-описание операции (списки) к кортежам """
    if isinstance(obj, list):
        return tuple(to_op(item) for item in obj)
    return obj


def _writes(raw) -> list[tuple[ObjectKey, tuple]]:
    if not isinstance(raw, list) or not raw:
        raise ValueError('writes должен быть непустым списком [key, op]')
    writes = []
    for item in raw:
        key, op = item
        writes.append((ObjectKey.from_list(key), to_op(op)))
    return writes


def _positive(value, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise ValueError(f"'{name}' должен быть положительным целым")
    return value


# Операции

def op_update(ctx: OpContext, args: dict):
    txn = yield from ctx.client.begin()
    for key, op in args['writes']:
        txn.update(key, op)
    if args.get('think'):
        yield Sleep(args['think'])
    try:
        txn.commit()
    except TokenConflictError:
        return 'aborted'
    return 'committed'


def op_read(ctx: OpContext, args: dict):
    txn = yield from ctx.client.begin()
    view = {}
    for index, key in enumerate(args['keys']):
        if index and args.get('think'):
            yield Sleep(args['think'])
        view[key] = txn.read(key)
    txn.commit()
    ctx.client.observe(txn, view)
    return {str(key): to_plain(value) for key, value in view.items()}


def op_protected_update(ctx: OpContext, args: dict):
    writes = args['writes']

    def body(txn):
        for key, op in writes:
            txn.update(key, op)
        if args.get('think'):
            yield Sleep(args['think'])
        return 'committed'

    client = ctx.client
    outcome, _ = yield from run_protected(
        client.agent, client.session, [key for key, _ in writes], body,
        client.owner
    )
    return outcome


def op_bc_increment(ctx: OpContext, args: dict):
    txn = yield from ctx.client.begin()
    txn.update(args['key'], ('increment', args['amount']))
    txn.commit()
    return 'ok'


def op_bc_decrement(ctx: OpContext, args: dict):
    client = ctx.client
    return (yield from decrement_with_sync(
        client.agent, client.session, args['key'], args['amount'],
        sync=args.get('sync', True)
    ))


def op_bc_transfer(ctx: OpContext, args: dict):
    txn = yield from ctx.client.begin()
    try:
        txn.update(args['key'], ('transfer', args['to'], args['amount']))
        txn.commit()
    except InsufficientRightsError:
        if txn.status == 'open':
            txn.abort()
        return 'insufficient'
    return 'ok'


def op_create_prescription(ctx: OpContext, args: dict):
    yield from ctx.app.create_prescription(
        ctx.client, args['prescription'], args['patient'], args['doctor'],
        args['pharmacy'], args['meds']
    )
    for med, count in args['meds'].items():
        ctx.ledger.record_prescribed(args['prescription'], med, count)
    return 'created'


def op_update_medication(ctx: OpContext, args: dict):
    yield from ctx.app.update_prescription_medication(
        ctx.client, args['prescription'], args['med'], args['delta']
    )
    ctx.ledger.record_prescribed(args['prescription'], args['med'],
                                 args['delta'])
    return 'updated'


def op_process_prescription(ctx: OpContext, args: dict):
    outcome = yield from ctx.app.process_prescription(
        ctx.client, args['prescription'], args['med'], args.get('n', 1),
        args.get('mode')
    )
    if outcome == DELIVERED:
        ctx.ledger.record_delivered(args['prescription'], args['med'],
                                    args.get('n', 1))
    return outcome


def op_staff_prescriptions(ctx: OpContext, args: dict):
    return (yield from ctx.app.get_staff_prescriptions(ctx.client, args['staff']))


def op_pharmacy_prescriptions(ctx: OpContext, args: dict):
    return (yield from ctx.app.get_pharmacy_prescriptions(
        ctx.client, args['pharmacy']
    ))


def op_read_copies(ctx: OpContext, args: dict):
    return (yield from ctx.app.read_prescription_copies(
        ctx.client, args['prescription'], args['patient'], args['pharmacy'],
        args.get('think', 0)
    ))


@dataclass(frozen=True)
class OperationSpec:
    name: str
    required: tuple[str, ...]
    run: Callable[[OpContext, dict], Any]


OPERATIONS = {
    spec.name: spec for spec in (
        OperationSpec('update', ('writes',), op_update),
        OperationSpec('read', ('keys',), op_read),
        OperationSpec('protected-update', ('writes',), op_protected_update),
        OperationSpec('bc-increment', ('key', 'amount'), op_bc_increment),
        OperationSpec('bc-decrement', ('key', 'amount'), op_bc_decrement),
        OperationSpec('bc-transfer', ('key', 'to', 'amount'), op_bc_transfer),
        OperationSpec(
            'create-prescription',
            ('prescription', 'patient', 'doctor', 'pharmacy', 'meds'),
            op_create_prescription
        ),
        OperationSpec(
            'update-prescription-medication',
            ('prescription', 'med', 'delta'),
            op_update_medication
        ),
        OperationSpec(
            'process-prescription', ('prescription', 'med'),
            op_process_prescription
        ),
        OperationSpec('get-staff-prescriptions', ('staff',),
                      op_staff_prescriptions),
        OperationSpec('get-pharmacy-prescriptions', ('pharmacy',),
                      op_pharmacy_prescriptions),
        OperationSpec(
            'read-prescription-copies',
            ('prescription', 'patient', 'pharmacy'),
            op_read_copies
        ),
    )
}


def parse_args(name: str, raw: dict, replicas: int) -> dict:
    """
    Проверяет и разбирает аргументы операции сценария.

    Выбрасывает:
        ScenarioFormatError
    """
    spec = OPERATIONS.get(name)
    if spec is None:
        raise ScenarioFormatError(
            f"неизвестная операция '{name}'. "
            f"Допустимые: {', '.join(OPERATIONS)}"
        )
    missing = [field for field in spec.required if field not in raw]
    if missing:
        raise ScenarioFormatError(
            f"операции '{name}' не хватает аргументов: {', '.join(missing)}"
        )
    args = dict(raw)
    try:
        if 'writes' in args:
            args['writes'] = _writes(args['writes'])
        if 'keys' in args:
            args['keys'] = [ObjectKey.from_list(key) for key in args['keys']]
        if 'key' in args:
            args['key'] = ObjectKey.from_list(args['key'])
        for field in ('amount', 'delta', 'n'):
            if field in args:
                _positive(args[field], field)
        if 'think' in args and (not isinstance(args['think'], int)
                                or args['think'] < 0):
            raise ValueError("'think' должен быть неотрицательным целым")
        if 'to' in args and not 0 <= args['to'] < replicas:
            raise ValueError(f"реплика 'to'={args['to']} вне диапазона")
        if 'meds' in args:
            if not isinstance(args['meds'], dict):
                raise ValueError("'meds' должен быть словарём лекарство -> count")
            for med, count in args['meds'].items():
                _positive(count, med)
        if 'mode' in args and args['mode'] not in ('cp', 'best-effort'):
            raise ValueError(f"неизвестный режим '{args['mode']}'")
    except (TypeError, ValueError) as e:
        raise ScenarioFormatError(f"операция '{name}': {e}")
    return args
