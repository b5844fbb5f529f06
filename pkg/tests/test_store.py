import logging

import pytest

from conftest import BUDGET, CNT, MAP, REG, SET, Cluster
from replica_hub.core.crdt import value_of
from replica_hub.core.exceptions import (
    ClockNotCoveredError,
    CounterConfigError,
    InsufficientRightsError,
    TokenConflictError,
    TxnStateError,
    TypeMismatchError,
)
from replica_hub.core.models import ObjectKey, Session, TxnId, VectorClock
from replica_hub.core.store import ABORTED, COMMITTED, Replica


def test_snapshot_hides_later_commits(cluster):
    txn = cluster[0].begin(Session('alice'))
    cluster.write(0, REG, ('assign', 'x'))
    assert txn.read(REG) is None
    txn.update(REG, ('assign', 'y'))
    assert txn.read(REG) == 'y'
    txn.commit()
    assert cluster[0].value(REG) == 'y'
    assert txn.read_set == {REG}


def test_without_snapshots_reads_see_fresh_commits():
    cluster = Cluster(2, ablations=('no-snapshots',))
    txn = cluster[0].begin(Session('alice'))
    cluster.write(0, REG, ('assign', 'x'))
    assert txn.read(REG) == 'x'


def test_materialise_older_snapshot(cluster):
    first = cluster.write(0, CNT, ('increment', 2))
    cluster.write(0, CNT, ('increment', 3))
    assert value_of(cluster[0].materialise(CNT, first)) == 2
    assert cluster[0].value(CNT) == 5
    with pytest.raises(ClockNotCoveredError):
        cluster[0].materialise(CNT, VectorClock.of({1: 1}))


def test_commit_replicates_whole_transaction(cluster):
    txn = cluster[0].begin(Session('alice'))
    txn.update(REG, ('assign', 'v'))
    txn.update(CNT, ('add', 4))
    clock = txn.commit()
    assert clock == VectorClock.of({0: 1})
    records = cluster.take()
    assert len(records) == 1
    assert records[0].keys == (REG, CNT)
    cluster.deliver_all(records)
    assert cluster[1].value(REG) == 'v'
    assert cluster[1].value(CNT) == 4
    assert cluster[1].applied == clock


def test_read_only_commit_sends_nothing(cluster):
    txn = cluster[0].begin(Session('alice'))
    txn.read(REG)
    assert txn.commit() == VectorClock.zero()
    assert txn.status == COMMITTED
    assert cluster.take() == []
    with pytest.raises(TxnStateError):
        txn.commit()


def test_dependent_transaction_waits_for_its_cause():
    cluster = Cluster(3)
    cluster.write(0, SET, ('add', 'a'))
    cause = cluster.take()[0]
    cluster[1].receive(cause)
    cluster.write(1, SET, ('add', 'b'))
    effect = cluster.take()[0]
    assert effect.snapshot == VectorClock.of({0: 1})

    assert cluster[2].receive(effect) == 0
    assert cluster[2].pending == [effect]
    assert cluster[2].value(SET) == frozenset()

    assert cluster[2].receive(cause) == 2
    assert cluster[2].pending == []
    assert cluster[2].value(SET) == frozenset({'a', 'b'})
    assert cluster[2].violations == []


def test_duplicate_delivery_is_ignored(cluster):
    cluster.write(0, CNT, ('increment', 1))
    record = cluster.take()[0]
    assert cluster[1].receive(record) == 1
    assert cluster[1].receive(record) == 0
    assert cluster[1].value(CNT) == 1


def test_concurrent_writes_converge(cluster):
    cluster.write(0, SET, ('add', 'x'))
    cluster.write(1, SET, ('add', 'y'))
    cluster.write(0, REG, ('assign', 'from-0'))
    cluster.write(1, REG, ('assign', 'from-1'))
    cluster.deliver_all(cluster.take())
    assert cluster[0].state_digest() == cluster[1].state_digest()
    assert cluster[0].value(SET) == frozenset({'x', 'y'})
    # равные lamport: побеждает реплика с большим id
    assert cluster[0].value(REG) == 'from-1'


def test_without_causal_deps_effect_overtakes_cause():
    cluster = Cluster(3, ablations=('no-causal-deps',))
    cluster.write(0, SET, ('add', 'a'))
    cause = cluster.take()[0]
    cluster[1].receive(cause)
    cluster.write(1, SET, ('add', 'b'))
    effect = cluster.take()[0]
    assert cluster[2].receive(effect) == 1
    assert cluster[2].value(SET) == frozenset({'b'})
    assert any(v.startswith('causal') for v in cluster[2].violations)


def test_without_atomic_writes_transaction_is_seen_partially():
    cluster = Cluster(2, ablations=('no-atomic-writes',))
    txn = cluster[0].begin(Session('alice'))
    txn.update(REG, ('assign', 'v'))
    txn.update(CNT, ('add', 1))
    txn.commit()
    fragments = cluster.take()
    assert [f.fragment for f in fragments] == [(0, 2), (1, 2)]

    cluster[1].receive(fragments[0])
    assert cluster[1].partial == [TxnId(0, 1)]
    assert cluster[1].value(REG) == 'v'
    assert cluster[1].value(CNT) == 0
    assert any(v.startswith('atomic') for v in cluster[1].violations)

    cluster[1].receive(fragments[1])
    assert cluster[1].partial == []
    assert cluster[1].value(CNT) == 1


def test_session_must_be_covered_on_other_replica(cluster):
    session = Session('alice')
    cluster.write(0, REG, ('assign', 1), session=session)
    assert session.last_seen == VectorClock.of({0: 1})
    with pytest.raises(ClockNotCoveredError):
        cluster[1].begin(session)
    cluster.deliver_all(cluster.take())
    assert cluster[1].begin(session).read(REG) == 1


def test_token_blocks_foreign_commit(cluster):
    cluster[0].hold_token(REG, 'owner-1')
    txn = cluster[0].begin(Session('alice'))
    txn.update(REG, ('assign', 'x'))
    with pytest.raises(TokenConflictError) as e:
        txn.commit()
    assert e.value.holder == 'owner-1'
    assert txn.status == ABORTED

    owned = cluster[0].begin(Session('bob'), owner='owner-1')
    owned.update(REG, ('assign', 'y'))
    owned.commit()
    cluster[0].drop_token(REG)
    assert cluster[0].value(REG) == 'y'


def test_map_field_type_follows_latest_update(cluster):
    txn = cluster[0].begin(Session('alice'))
    txn.update(MAP, ('update', 'visits', 'counter', ('add', 1)))
    txn.update(MAP, ('update', 'visits', 'set', ('add', 'x')))
    with pytest.raises(TypeMismatchError):
        txn.update(REG, ('add', 1))
    txn.update(MAP, ('update', 'name', 'register', ('assign', 'bob')))
    txn.commit()
    assert cluster[0].value(MAP) == {'visits': frozenset({'x'}), 'name': 'bob'}


def test_concurrent_retype_of_map_field_converges(cluster):
    cluster.write(0, MAP, ('update', 'x', 'counter', ('add', 1)))
    cluster.write(1, MAP, ('update', 'x', 'set', ('add', 'v')))
    cluster.deliver_all(cluster.take())
    assert cluster[0].state_digest() == cluster[1].state_digest()
    assert cluster[0].value(MAP) == {'x': frozenset({'v'})}

    cluster.write(0, MAP, ('remove', 'x'))
    cluster.deliver_all(cluster.take())
    assert cluster[0].value(MAP) == cluster[1].value(MAP) == {}


def test_map_remove_observes_only_seen_updates(cluster):
    cluster.write(0, MAP, ('update', 'f', 'set', ('add', 'a')))
    cluster.deliver_all(cluster.take())
    cluster.write(0, MAP, ('remove', 'f'))
    cluster.write(1, MAP, ('update', 'f', 'set', ('add', 'b')))
    cluster.deliver_all(cluster.take())
    assert cluster[0].value(MAP) == cluster[1].value(MAP)
    assert cluster[0].value(MAP) == {'f': frozenset({'b'})}


def test_bounded_decrement_beyond_share_is_rejected(budget_cluster):
    txn = budget_cluster[1].begin(Session('alice'))
    with pytest.raises(InsufficientRightsError):
        txn.update(BUDGET, ('decrement', 2))
    assert txn.writes == {}
    txn.update(BUDGET, ('decrement', 1))
    txn.commit()
    assert budget_cluster[1].value(BUDGET) == 3


def test_bounded_commit_rechecks_rights(budget_cluster):
    replica = budget_cluster[1]
    first = replica.begin(Session('alice'))
    second = replica.begin(Session('bob'))
    first.update(BUDGET, ('decrement', 1))
    second.update(BUDGET, ('decrement', 1))
    first.commit()
    with pytest.raises(InsufficientRightsError):
        second.commit()
    assert second.status == ABORTED
    budget_cluster.deliver_all(budget_cluster.take())
    assert [r.value(BUDGET) for r in budget_cluster.replicas] == [3, 3, 3]


def test_bounded_transfer_enables_remote_decrement(budget_cluster):
    budget_cluster.write(0, BUDGET, ('transfer', 2, 2))
    budget_cluster.deliver_all(budget_cluster.take())
    budget_cluster.write(2, BUDGET, ('decrement', 3))
    budget_cluster.deliver_all(budget_cluster.take())
    assert {r.value(BUDGET) for r in budget_cluster.replicas} == {1}


def test_undeclared_bounded_counter(cluster):
    with pytest.raises(CounterConfigError):
        cluster[0].value(ObjectKey('other', 'x', 'bcounter'))


def test_unknown_ablation():
    with pytest.raises(ValueError):
        Replica(0, 1, ablations=('no-clocks',))


def test_receive_logs_clock_change(cluster, caplog):
    caplog.set_level(logging.INFO, logger='replica_hub.decorators')
    cluster.write(0, REG, ('assign', 'x'))
    cluster.deliver_all(cluster.take())
    (line,) = [record.getMessage() for record in caplog.records
               if record.getMessage().startswith('RECEIVE')]
    assert 'replica=1' in line
    assert 'applied_before: ' in line and 'applied_after: ' in line
    assert line.endswith('returned: 1')
