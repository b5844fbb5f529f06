"""
Модуль содержит встроенный корпус моделей приложений.
Те же модели лежат в data/models/*.toml.
"""

from replica_hub.checker.loader import model_from_dict
from replica_hub.checker.model import AppModel

PROCESS = 'process-prescription'
NO_DUPLICATES = 'no-duplicates'

FMKE = {
    'name': 'fmke',
    'description': 'Рецепты FMKe: count лекарства в рецепте, выдача аптекой',
    'vars': {
        'created': {'range': [0, 1]},
        'count': {'range': [0, 3]},
    },
    'invariants': {
        NO_DUPLICATES: 'count >= 0',
        'well-formed': 'created == 1 or count == 0',
    },
    'ops': [
        {
            'name': 'create-prescription',
            'params': {'c': {'range': [1, 2]}},
            'pre': 'created == 0',
            'effects': [
                {'kind': 'assign-lww', 'var': 'created', 'value': 1},
                {'kind': 'add', 'var': 'count', 'value': 'c'},
            ],
        },
        {
            'name': 'update-prescription-medication',
            'params': {'d': {'range': [1, 2]}},
            'pre': 'created == 1',
            'effects': [{'kind': 'add', 'var': 'count', 'value': 'd'}],
        },
        {
            'name': PROCESS,
            'params': {'n': {'range': [1, 2]}},
            'pre': 'created == 1 and count >= n',
            'effects': [{'kind': 'add', 'var': 'count', 'value': '-n'}],
        },
        {'name': 'get-staff-prescriptions'},
        {'name': 'get-pharmacy-prescriptions'},
    ],
    'ordered': [['create-prescription', '*']],
}

BANK = {
    'name': 'bank',
    'description': 'Счёт без овердрафта: пополнение и снятие на любой реплике',
    'vars': {'balance': {'range': [0, 3]}},
    'invariants': {'no-overdraft': 'balance >= 0'},
    'ops': [
        {
            'name': 'deposit',
            'params': {'a': {'range': [1, 2]}},
            'effects': [{'kind': 'add', 'var': 'balance', 'value': 'a'}],
        },
        {
            'name': 'withdraw',
            'params': {'a': {'range': [1, 2]}},
            'pre': 'balance >= a',
            'effects': [{'kind': 'add', 'var': 'balance', 'value': '-a'}],
        },
    ],
}


def _escrow_ops(own: int, other: int) -> list[dict]:
    share, peer = f'share{own}', f'share{other}'
    return [
        {
            'name': f'withdraw-{own}',
            'params': {'a': {'range': [1, 2]}},
            'pre': f'{share} >= a',
            'effects': [{'kind': 'add', 'var': share, 'value': '-a'}],
        },
        {
            'name': f'deposit-{own}',
            'params': {'a': {'range': [1, 2]}},
            'effects': [{'kind': 'add', 'var': share, 'value': 'a'}],
        },
        {
            'name': f'transfer-{own}-{other}',
            'params': {'a': {'range': [1, 2]}},
            'pre': f'{share} >= a',
            'effects': [
                {'kind': 'add', 'var': share, 'value': '-a'},
                {'kind': 'add', 'var': peer, 'value': 'a'},
            ],
        },
    ]


def _same_replica(own: int, other: int) -> list[list[str]]:
    names = [f'withdraw-{own}', f'deposit-{own}', f'transfer-{own}-{other}']
    return [[a, b] for a in names for b in names]


ESCROW = {
    'name': 'escrow',
    'description': 'Счёт с долями реплик: каждая тратит только свою долю',
    'vars': {
        'share0': {'range': [0, 2]},
        'share1': {'range': [0, 2]},
    },
    'invariants': {'non-negative': 'share0 >= 0 and share1 >= 0'},
    'ops': _escrow_ops(0, 1) + _escrow_ops(1, 0),
    'ordered': _same_replica(0, 1) + _same_replica(1, 0),
}

PASSWORD = {
    'name': 'password',
    'description': 'Вход администратора разрешён только с нестандартным паролем',
    'vars': {
        'enabled': {'range': [0, 1]},
        'password': {'values': ['0000', 'secret']},
    },
    'invariants': {'safe-login': "enabled == 0 or password != '0000'"},
    'ops': [
        {
            'name': 'set-password',
            'params': {'p': {'values': ['secret']}},
            'effects': [{'kind': 'assign-lww', 'var': 'password', 'value': 'p'}],
        },
        {
            'name': 'reset-password',
            'pre': 'enabled == 0',
            'effects': [
                {'kind': 'assign-lww', 'var': 'password', 'value': "'0000'"}
            ],
        },
        {
            'name': 'enable-login',
            'pre': "password != '0000'",
            'effects': [{'kind': 'assign-lww', 'var': 'enabled', 'value': 1}],
        },
        {
            'name': 'disable-login',
            'effects': [{'kind': 'assign-lww', 'var': 'enabled', 'value': 0}],
        },
    ],
    'sync': [['enable-login', 'reset-password']],
}


def fmke_model(sync: bool = False, drop_no_duplicates: bool = False) -> AppModel:
    """
    Модель FMKe для проверки.

    Аргументы:
        sync - синхронизировать пару (process-prescription, process-prescription)
        drop_no_duplicates - убрать инвариант no-duplicates
    """
    model = model_from_dict(FMKE, source='corpus')
    if sync:
        model = model.with_sync_pair(PROCESS, PROCESS)
    if drop_no_duplicates:
        model = model.without_invariant(NO_DUPLICATES)
    return model


def bank_model() -> AppModel:
    return model_from_dict(BANK, source='corpus')


def escrow_model() -> AppModel:
    return model_from_dict(ESCROW, source='corpus')


def password_model() -> AppModel:
    return model_from_dict(PASSWORD, source='corpus')


MODELS = {
    'fmke': fmke_model,
    'fmke-sync': lambda: fmke_model(sync=True),
    'fmke-no-duplicates-dropped': lambda: fmke_model(drop_no_duplicates=True),
    'bank': bank_model,
    'escrow': escrow_model,
    'password': password_model,
}


def corpus() -> dict[str, AppModel]:
    return {name: build() for name, build in MODELS.items()}
