import logging
from functools import wraps

from replica_hub.core.utils import canonical

logger = logging.getLogger(__name__)

AMOUNT_ACTIONS = frozenset({'TRANSFER'})


def format_log(
        action:str,
        replica:int = None,
        txn:str = None,
        key:str = None,
        amount:int = None,
        result:str = 'OK',
        error_type:str = None,
        error_message:str = None,
        verbose:dict = None
):
    """
    Строка журнала вида
        COMMIT replica=0 txn='t1' key='map:p1' result='OK' applied_after: ...

    action - BEGIN, COMMIT, ABORT, RECEIVE, RELEASE, TRANSFER, CREATE,
    PROCESS, CHECK; amount - декремент или число переданных прав;
    verbose - пары имя/значение в конце строки.
    Пустые поля пропускаются.
    """
    fields = [
        ('replica', replica, replica is not None, '{}'),
        ('txn', txn, bool(txn), "'{}'"),
        ('key', key, bool(key), "'{}'"),
        ('amount', amount, bool(amount), '{}'),
        ('result', result, True, "'{}'"),
        ('error_type', error_type, bool(error_type), "'{}'"),
        ('error_message', error_message, bool(error_message), "'{}'"),
    ]
    line = [action]
    line += [f'{name}=' + template.format(value)
             for name, value, present, template in fields if present]
    line += [f'{name}: {value}' for name, value in (verbose or {}).items()]
    return ' '.join(line)


def _call_context(action:str, args, kwargs):
    """ Транзакция, ключ и количество среди аргументов вызова """
    txn = key = None
    amount = kwargs.get('amount')
    for arg in (*args[1:], *kwargs.values()):
        if txn is None and hasattr(arg, 'label'):
            txn = arg.label
        elif txn is None and hasattr(arg, 'txn_id'):
            txn = str(arg.txn_id)
        elif key is None and hasattr(arg, 'type_tag'):
            key = str(arg)
        elif (amount is None and action in AMOUNT_ACTIONS
              and isinstance(arg, int) and not isinstance(arg, bool)):
            amount = arg
    return txn, key, amount


def _replica_of(owner):
    replica = getattr(owner, 'id', None)
    return getattr(owner, 'replica_id', None) if replica is None else replica


def log_action(action:str, verbose:bool = False):
    """
    Журналирует вызов метода реплики или агента синхронизации.
    При verbose=True в строку попадают часы реплики до и после вызова
    и возвращённое значение.
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            if not logger.isEnabledFor(logging.INFO):
                return func(*args, **kwargs)

            owner = args[0] if args else None
            replica = _replica_of(owner)
            txn, key, amount = _call_context(action, args, kwargs)
            with_clock = verbose and hasattr(owner, 'applied')
            extra = {'applied_before': str(owner.applied)} if with_clock else {}

            try:
                outcome = func(*args, **kwargs)
            except Exception as e:
                logger.info(format_log(
                    action, replica, txn, key, amount, result='ERROR',
                    error_type=type(e).__name__, error_message=str(e),
                ))
                raise

            if with_clock:
                extra['applied_after'] = str(owner.applied)
                if outcome is not None:
                    extra['returned'] = canonical(outcome)
            logger.info(format_log(action, replica, txn, key, amount,
                                   verbose=extra))
            return outcome
        return wrapper
    return decorator
