import random
from collections import deque

import pytest

from replica_hub.core.bounded_counter import BoundedCounter, new_bounded
from replica_hub.core.exceptions import (
    CounterConfigError,
    InsufficientRightsError,
)


def test_new_counter_distributes_shares():
    counter = new_bounded(10, 14, [2, 1, 1])
    assert counter.value() == 14
    assert [counter.local_rights(i) for i in range(3)] == [2, 1, 1]


@pytest.mark.parametrize('k, initial, shares', [
    (0, 3, [1, 1]),
    (5, 4, [0]),
    (0, 2, []),
    (0, 2, [3, -1]),
])
def test_bad_configuration(k, initial, shares):
    with pytest.raises(CounterConfigError):
        new_bounded(k, initial, shares)


def test_decrement_consumes_local_share():
    counter = new_bounded(0, 3, [2, 1]).decrement(0, 2)
    assert counter.value() == 1
    assert counter.local_rights(0) == 0
    with pytest.raises(InsufficientRightsError) as e:
        counter.decrement(0, 1)
    assert (e.value.available, e.value.replica, e.value.required) == (0, 0, 1)


def test_transfer_moves_rights_without_changing_value():
    counter = new_bounded(0, 3, [2, 1]).transfer(0, 1, 2)
    assert counter.value() == 3
    assert counter.local_rights(0) == 0
    assert counter.local_rights(1) == 3
    with pytest.raises(ValueError):
        counter.transfer(1, 1, 1)
    with pytest.raises(InsufficientRightsError):
        counter.transfer(0, 1, 1)


def test_increment_adds_own_rights():
    counter = new_bounded(0, 0, [0, 0]).increment(1, 4)
    assert counter.value() == 4
    assert counter.local_rights(1) == 4


@pytest.mark.parametrize('amount, error', [(0, ValueError), (-1, ValueError),
                                           (True, TypeError), (1.5, TypeError)])
def test_amount_must_be_positive_int(amount, error):
    with pytest.raises(error):
        new_bounded(0, 2, [2]).decrement(0, amount)


def _cells(state: BoundedCounter) -> list[int]:
    return [cell for row in state.rights for cell in row] + list(state.consumed)


def _grows(before: BoundedCounter, after: BoundedCounter) -> bool:
    return all(a <= b for a, b in zip(_cells(before), _cells(after)))


def test_merge_is_commutative_and_idempotent():
    base = new_bounded(0, 4, [2, 2])
    a = base.decrement(0, 1).transfer(0, 1, 1)
    b = base.increment(1, 3).decrement(1, 2)
    assert a.merge(b) == b.merge(a)
    assert a.merge(a) == a
    assert _grows(a, a.merge(b))
    assert not _grows(b, a)


def test_merge_rejects_other_configuration():
    with pytest.raises(CounterConfigError):
        new_bounded(0, 2, [1, 1]).merge(new_bounded(1, 3, [1, 1]))


def random_states(seed: int, steps: int = 30) -> list[BoundedCounter]:
    """ Состояния трёх реплик, достигнутые случайной последовательностью операций """
    rng = random.Random(seed)
    replicas = [new_bounded(0, 6, [3, 2, 1])] * 3
    reached = []
    for _ in range(steps):
        i = rng.randrange(3)
        j = rng.choice([r for r in range(3) if r != i])
        local = replicas[i]
        match rng.choice(['decrement', 'increment', 'transfer', 'merge']):
            case 'decrement' if local.local_rights(i) >= 1:
                local = local.decrement(i, 1)
            case 'increment':
                local = local.increment(i, rng.randint(1, 2))
            case 'transfer' if local.local_rights(i) >= 1:
                local = local.transfer(i, j, 1)
            case 'merge':
                local = local.merge(replicas[j])
        replicas[i] = local
        reached.append(local)
    return reached


@pytest.mark.parametrize('seed', range(20))
def test_merge_laws_on_reached_states(seed):
    states = random_states(seed)
    rng = random.Random(seed)
    for _ in range(50):
        a, b, c = (rng.choice(states) for _ in range(3))
        assert a.merge(b) == b.merge(a)
        assert a.merge(b).merge(c) == a.merge(b.merge(c))
        assert a.merge(a) == a
        merged = a.merge(b)
        assert _grows(a, merged) and _grows(b, merged)
        assert merged.value() >= merged.k


K, INITIAL, SHARES = 0, 2, (1, 1, 0)
MAX_DECREMENTS, MAX_INCREMENTS, MAX_TRANSFERS = 4, 2, 2


class LocalStates:
    """
    Номера различных локальных состояний и кэш переходов между ними.
    Проверки одного состояния или перехода выполняются один раз.
    """
    def __init__(self):
        self.states: list[BoundedCounter] = []
        self._ids: dict[BoundedCounter, int] = {}
        self._moves: dict[tuple, int | None] = {}
        self._merges: dict[tuple[int, int], int] = {}
        self._rights: dict[tuple[int, int], int] = {}
        self._own: dict[tuple[int, int], tuple[int, int, int]] = {}

    def intern(self, state: BoundedCounter) -> int:
        if state not in self._ids:
            assert state.value() >= state.k
            self._ids[state] = len(self.states)
            self.states.append(state)
        return self._ids[state]

    def rights(self, sid: int, i: int) -> int:
        if (sid, i) not in self._rights:
            self._rights[sid, i] = self.states[sid].local_rights(i)
        return self._rights[sid, i]

    def own(self, sid: int, i: int) -> tuple[int, int, int]:
        """ Инкременты, передачи и декременты, выполненные самой репликой i """
        if (sid, i) not in self._own:
            state = self.states[sid]
            self._own[sid, i] = (
                state.rights[i][i] - SHARES[i],
                sum(state.rights[i][j] for j in range(state.n) if j != i),
                state.consumed[i],
            )
        return self._own[sid, i]

    def move(self, sid: int, op: str, i: int, j: int | None = None) -> int | None:
        key = (sid, op, i, j)
        if key not in self._moves:
            self._moves[key] = self._run(sid, op, i, j)
        return self._moves[key]

    def merge(self, a: int, b: int) -> int:
        if (a, b) not in self._merges:
            left, right = self.states[a], self.states[b]
            merged = left.merge(right)
            assert _grows(left, merged) and _grows(right, merged)
            self._merges[a, b] = self.intern(merged)
        return self._merges[a, b]

    def _run(self, sid: int, op: str, i: int, j: int | None) -> int | None:
        state = self.states[sid]
        available = self.rights(sid, i)
        try:
            match op:
                case 'decrement':
                    after = state.decrement(i, 1)
                case 'increment':
                    after = state.increment(i, 1)
                case 'transfer':
                    after = state.transfer(i, j, 1)
        except InsufficientRightsError:
            assert op != 'increment' and available < 1
            return None
        assert op == 'increment' or available >= 1
        assert _grows(state, after)
        return self.intern(after)


def test_exhaustive_small_system_never_goes_below_bound():
    """
    Обход всех достижимых состояний трёх реплик: до 4 декрементов,
    2 инкрементов и 2 передач прав с произвольными слияниями.
    """
    local = LocalStates()
    zero = local.intern(new_bounded(K, INITIAL, list(SHARES)))
    start = (zero,) * 3
    seen = {start}
    queue = deque([start])

    while queue:
        states = queue.popleft()
        increments, transfers, decrements = (
            sum(column)
            for column in zip(*(local.own(s, r) for r, s in enumerate(states)))
        )
        value = K + INITIAL + increments - decrements
        assert value >= K

        # всё, что известно системе в целом
        everything = local.merge(local.merge(states[0], states[1]), states[2])
        assert local.states[everything].value() == value
        assert sum(local.rights(everything, i) for i in range(3)) == value - K

        for r, s in enumerate(states):
            # локальная копия не переоценивает права и не уходит в минус
            assert 0 <= local.rights(s, r) <= local.rights(everything, r)
            moves = []
            if decrements < MAX_DECREMENTS:
                moves.append(local.move(s, 'decrement', r))
            if increments < MAX_INCREMENTS:
                moves.append(local.move(s, 'increment', r))
            for j in range(3):
                if j == r:
                    continue
                if transfers < MAX_TRANSFERS:
                    moves.append(local.move(s, 'transfer', r, j))
                moves.append(local.merge(s, states[j]))
            for after in moves:
                if after is None or after == s:
                    continue
                following = states[:r] + (after,) + states[r + 1:]
                if following not in seen:
                    seen.add(following)
                    queue.append(following)

    assert len(seen) > 500_000
