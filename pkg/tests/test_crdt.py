import itertools
import random

import pytest

from replica_hub.core.crdt import (
    AwMap,
    AwSet,
    CounterAdd,
    LwwRegister,
    MapRemove,
    MapUpdate,
    PnCounter,
    RegisterAssign,
    SetAdd,
    SetRemove,
    apply,
    concurrent_commute,
    new_state,
    stamp,
    value_of,
)
from replica_hub.core.exceptions import TypeMismatchError, UnknownTypeError
from replica_hub.core.models import Dot


def fold(state, effects):
    for effect in effects:
        state = apply(state, effect)
    return state


def test_register_keeps_largest_timestamp():
    state = fold(LwwRegister(), [
        RegisterAssign('b', (2, 0)),
        RegisterAssign('a', (1, 1)),
    ])
    assert value_of(state) == 'b'
    # при равном lamport побеждает больший id реплики
    assert value_of(apply(state, RegisterAssign('c', (2, 1)))) == 'c'


def test_counter_sums_increments_and_decrements():
    state = fold(PnCounter(), [
        CounterAdd(0, 5), CounterAdd(1, -2), CounterAdd(0, -1), CounterAdd(1, 0)
    ])
    assert value_of(state) == 2
    assert state.inc == {0: 5}
    assert state.dec == {0: 1, 1: 2}


def test_set_concurrent_add_wins_over_remove():
    base = apply(AwSet(), SetAdd('x', Dot(0, 1)))
    remove = SetRemove('x', base.entries['x'])
    add = SetAdd('x', Dot(1, 1))
    assert concurrent_commute(base, remove, add)
    assert value_of(fold(base, [remove, add])) == frozenset({'x'})
    assert value_of(apply(base, remove)) == frozenset()


def test_set_remove_of_unknown_element_is_noop():
    state = AwSet()
    assert apply(state, SetRemove('y', frozenset())) is state


def test_map_remove_drops_observed_content():
    state = apply(AwMap(), MapUpdate('n', CounterAdd(0, 3), Dot(0, 1)))
    removed = apply(state, MapRemove('n', state.observed('n')))
    assert value_of(removed) == {}
    assert removed.entries == {}
    revived = apply(removed, MapUpdate('n', CounterAdd(0, 1), Dot(0, 2)))
    assert value_of(revived) == {'n': 1}


def test_removed_field_can_change_type():
    state = apply(AwMap(), MapUpdate('n', CounterAdd(0, 3), Dot(0, 1)))
    state = apply(state, MapRemove('n', state.observed('n')))
    state = apply(state, MapUpdate('n', SetAdd('x', Dot(0, 2)), Dot(0, 3)))
    assert value_of(state) == {'n': frozenset({'x'})}


def test_concurrent_update_keeps_only_its_own_contribution():
    base = apply(AwMap(), MapUpdate('n', CounterAdd(0, 3), Dot(0, 1)))
    remove = MapRemove('n', base.observed('n'))
    update = MapUpdate('n', CounterAdd(1, 1), Dot(1, 1))
    assert concurrent_commute(base, remove, update)
    assert value_of(fold(base, [remove, update])) == {'n': 1}


def test_map_concurrent_update_survives_remove():
    base = apply(AwMap(), MapUpdate('f', RegisterAssign('v', (1, 0)), Dot(0, 1)))
    remove = MapRemove('f', base.observed('f'))
    update = MapUpdate('f', RegisterAssign('w', (2, 1)), Dot(1, 1))
    assert concurrent_commute(base, remove, update)
    assert value_of(fold(base, [update, remove])) == {'f': 'w'}


def test_concurrent_updates_with_different_types_merge():
    as_counter = MapUpdate('f', CounterAdd(0, 1), Dot(0, 1))
    as_set = MapUpdate('f', SetAdd('x', Dot(1, 2)), Dot(1, 1))
    assert concurrent_commute(AwMap(), as_counter, as_set)
    state = fold(AwMap(), [as_counter, as_set])
    assert set(state.entries) == {('f', 'counter'), ('f', 'set')}
    # видна версия с наибольшей меткой
    assert value_of(state) == {'f': frozenset({'x'})}
    assert state.typed('f', 'counter') == PnCounter({0: 1})

    removed = apply(state, MapRemove('f', state.observed('f')))
    assert removed.entries == {}


def test_effect_for_other_type_is_rejected():
    with pytest.raises(TypeMismatchError) as e:
        apply(PnCounter(), SetAdd('x', Dot(0, 1)))
    assert e.value.expected == 'counter'
    assert e.value.actual == 'set'


def test_unknown_type_tag():
    with pytest.raises(UnknownTypeError):
        new_state('tree')


def test_stamp_reaches_nested_assign():
    effect = MapUpdate('f', RegisterAssign('v', (0, 0)), Dot(0, 1))
    stamped = stamp(effect, (7, 2))
    assert stamped.effect.ts == (7, 2)
    assert stamp(CounterAdd(0, 1), (7, 2)) == CounterAdd(0, 1)


@pytest.mark.parametrize('state, effects', [
    (LwwRegister(), [
        RegisterAssign('a', (1, 0)), RegisterAssign('b', (1, 1)),
        RegisterAssign('c', (2, 0)),
    ]),
    (PnCounter(), [CounterAdd(0, 2), CounterAdd(1, -3), CounterAdd(2, 1)]),
    (apply(AwSet(), SetAdd('x', Dot(0, 1))), [
        SetAdd('x', Dot(1, 1)), SetRemove('x', frozenset({Dot(0, 1)})),
        SetAdd('y', Dot(2, 1)),
    ]),
    (apply(AwMap(), MapUpdate('f', CounterAdd(0, 1), Dot(0, 1))), [
        MapRemove('f', frozenset({Dot(0, 1)})),
        MapUpdate('f', CounterAdd(1, 2), Dot(1, 1)),
        MapUpdate('g', SetAdd('z', Dot(2, 2)), Dot(2, 1)),
    ]),
])
def test_any_delivery_order_gives_same_state(state, effects):
    values = [fold(state, order) for order in itertools.permutations(effects)]
    assert all(v == values[0] for v in values)


FIELDS = ('a', 'b')


class Issuer:
    """ Реплика, порождающая эффекты словаря по своему локальному состоянию """
    def __init__(self, replica: int):
        self.replica = replica
        self.state = AwMap()
        self.known: list[int] = []
        self._dots = 0

    def dot(self) -> Dot:
        self._dots += 1
        return Dot(self.replica, self._dots)

    def random_effect(self, rng, ts: int):
        key = rng.choice(FIELDS)
        match rng.choice(['counter', 'set-add', 'set-remove', 'assign', 'remove']):
            case 'counter':
                nested = CounterAdd(self.replica, rng.choice([-2, -1, 1, 3]))
            case 'set-add':
                nested = SetAdd(rng.choice('xy'), self.dot())
            case 'set-remove':
                element = rng.choice('xy')
                observed = self.state.typed(key, 'set').entries.get(
                    element, frozenset()
                )
                nested = SetRemove(element, observed)
            case 'assign':
                nested = RegisterAssign(rng.randrange(5), (ts, self.replica))
            case 'remove':
                return MapRemove(key, self.state.observed(key))
        return MapUpdate(key, nested, self.dot())


def random_history(seed: int, replicas: int = 3, steps: int = 40):
    """
    Случайная история: реплики порождают эффекты и иногда получают
    все эффекты, известные другой реплике. Возвращает эффекты и их
    причинные зависимости.
    """
    rng = random.Random(seed)
    issuers = [Issuer(r) for r in range(replicas)]
    effects, deps = [], []
    for ts in range(steps):
        issuer = rng.choice(issuers)
        if rng.random() < 0.25:
            source = rng.choice(issuers)
            for index in source.known:
                if index not in issuer.known:
                    issuer.state = apply(issuer.state, effects[index])
                    issuer.known.append(index)
            continue
        effect = issuer.random_effect(rng, ts)
        deps.append(frozenset(issuer.known))
        effects.append(effect)
        issuer.state = apply(issuer.state, effect)
        issuer.known.append(len(effects) - 1)
    return effects, deps


def causal_order(rng, deps) -> list[int]:
    delivered, order = set(), []
    while len(order) < len(deps):
        ready = [i for i, needed in enumerate(deps)
                 if i not in delivered and needed <= delivered]
        chosen = rng.choice(ready)
        delivered.add(chosen)
        order.append(chosen)
    return order


@pytest.mark.parametrize('seed', range(40))
def test_random_histories_converge(seed):
    effects, deps = random_history(seed)
    rng = random.Random(seed)
    states = [
        fold(AwMap(), [effects[i] for i in causal_order(rng, deps)])
        for _ in range(6)
    ]
    assert all(state == states[0] for state in states)
    assert all(value_of(state) == value_of(states[0]) for state in states)
