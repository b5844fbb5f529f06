"""
Модуль содержит Bounded Counter - числовой CRDT с инвариантом value >= k.

Права (rights) распределены между репликами заранее:
    rights[i][i] - права, полученные репликой i (начальная доля + инкременты)
    rights[i][j] - права, переданные репликой i реплике j
    consumed[i] - декременты, выполненные репликой i

Строку i матрицы и consumed[i] пишет только реплика i, поэтому слияние -
поклеточный максимум.
"""

from __future__ import annotations

from dataclasses import dataclass

from replica_hub.core.exceptions import (
    CounterConfigError,
    InsufficientRightsError,
)


@dataclass(frozen=True)
class BoundedCounter:
    """
    Неизменяемое состояние Bounded Counter.
    Все операции возвращают новое состояние.
    """
    k: int
    rights: tuple[tuple[int, ...], ...]
    consumed: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.consumed)

    def value(self) -> int:
        """ Значение счетчика: k + сумма собственных прав - сумма декрементов """
        return (
            self.k
            + sum(self.rights[i][i] for i in range(self.n))
            - sum(self.consumed)
        )

    def local_rights(self, i: int) -> int:
        """ Права, которые реплика i может потратить без синхронизации """
        self._check_replica(i)
        incoming = sum(self.rights[j][i] for j in range(self.n) if j != i)
        outgoing = sum(self.rights[i][j] for j in range(self.n) if j != i)
        return self.rights[i][i] + incoming - outgoing - self.consumed[i]

    def increment(self, i: int, amount: int) -> BoundedCounter:
        """ Инкремент всегда доступен: увеличивает rights[i][i] """
        self._check_amount(amount)
        return self._with_cell(i, i, self.rights[i][i] + amount)

    def decrement(self, i: int, amount: int) -> BoundedCounter:
        """
        Декремент из локальной доли.

        Выбрасывает:
            InsufficientRightsError - если local_rights(i) < amount
            (состояние не изменяется)
        """
        self._check_amount(amount)
        available = self.local_rights(i)
        if available < amount:
            raise InsufficientRightsError(available, i, amount)
        consumed = list(self.consumed)
        consumed[i] += amount
        return BoundedCounter(self.k, self.rights, tuple(consumed))

    def transfer(self, source: int, target: int, amount: int) -> BoundedCounter:
        """
        Передача прав (donate) от source к target.

        Выбрасывает:
            ValueError - если source == target
            InsufficientRightsError - если прав source не хватает
        """
        self._check_amount(amount)
        self._check_replica(target)
        if source == target:
            raise ValueError('Реплика не может передать права самой себе.')
        available = self.local_rights(source)
        if available < amount:
            raise InsufficientRightsError(available, source, amount)
        return self._with_cell(
            source, target, self.rights[source][target] + amount
        )

    def merge(self, other: BoundedCounter) -> BoundedCounter:
        """ Поклеточный максимум двух состояний (коммутативен и идемпотентен) """
        if self.k != other.k or self.n != other.n:
            raise CounterConfigError(
                f'нельзя объединить счетчики (k={self.k}, n={self.n}) '
                f'и (k={other.k}, n={other.n})'
            )
        rights = tuple(
            tuple(max(a, b) for a, b in zip(row_a, row_b))
            for row_a, row_b in zip(self.rights, other.rights)
        )
        consumed = tuple(
            max(a, b) for a, b in zip(self.consumed, other.consumed)
        )
        return BoundedCounter(self.k, rights, consumed)

    def _with_cell(self, i: int, j: int, cell: int) -> BoundedCounter:
        self._check_replica(i)
        rights = [list(row) for row in self.rights]
        rights[i][j] = cell
        return BoundedCounter(
            self.k, tuple(tuple(row) for row in rights), self.consumed
        )

    def _check_replica(self, i: int):
        if not isinstance(i, int) or not 0 <= i < self.n:
            raise ValueError(f'Реплика {i} вне диапазона [0, {self.n}).')

    @staticmethod
    def _check_amount(amount: int):
        if not isinstance(amount, int) or isinstance(amount, bool):
            raise TypeError('Количество должно быть целым числом.')
        if amount <= 0:
            raise ValueError('Количество должно быть положительным.')

    def to_dict(self):
        return {
            'type': 'bcounter',
            'k': self.k,
            'rights': [list(row) for row in self.rights],
            'consumed': list(self.consumed),
        }


def new_bounded(k: int, initial: int, shares) -> BoundedCounter:
    """
    Создает Bounded Counter с границей k, начальным значением initial
    и начальными долями реплик shares (сумма долей = initial - k).

    Выбрасывает:
        CounterConfigError
    """
    shares = list(shares)
    if not shares:
        raise CounterConfigError('список долей не должен быть пустым')
    if any(not isinstance(s, int) or s < 0 for s in shares):
        raise CounterConfigError(
            f'доли должны быть неотрицательными целыми: {shares}'
        )
    if initial < k:
        raise CounterConfigError(f'начальное значение {initial} меньше k={k}')
    if sum(shares) != initial - k:
        raise CounterConfigError(
            f'сумма долей {sum(shares)} не равна initial - k = {initial - k}'
        )
    n = len(shares)
    rights = tuple(
        tuple(shares[i] if i == j else 0 for j in range(n)) for i in range(n)
    )
    return BoundedCounter(k, rights, tuple(0 for _ in range(n)))
