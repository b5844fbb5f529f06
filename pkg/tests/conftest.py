import io
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

import pytest

from replica_hub.core.bounded_counter import new_bounded
from replica_hub.core.models import ObjectKey, Session
from replica_hub.core.store import Replica

ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = ROOT / 'data' / 'scenarios'
MODEL_DIR = ROOT / 'data' / 'models'

REG = ObjectKey('reg', 'r', 'register')
CNT = ObjectKey('cnt', 'c', 'counter')
SET = ObjectKey('set', 's', 'set')
MAP = ObjectKey('map', 'm', 'map')
BUDGET = ObjectKey('budget', 'b', 'bcounter')


class Cluster:
    """ Реплики, соединённые ручной «сетью»: сообщения копятся в outbox """
    def __init__(self, n: int = 2, ablations=(), counters=None):
        self.outbox: list[tuple[int, object]] = []
        self.replicas = [
            Replica(
                i, n, counters=counters, ablations=ablations,
                send=lambda record, i=i: self.outbox.append((i, record))
            )
            for i in range(n)
        ]

    def __getitem__(self, index) -> Replica:
        return self.replicas[index]

    def take(self) -> list:
        records, self.outbox = [r for _, r in self.outbox], []
        return records

    def deliver_all(self, records, targets=None):
        for record in records:
            for replica in self.replicas:
                if replica.id == record.origin:
                    continue
                if targets is None or replica.id in targets:
                    replica.receive(record)

    def write(self, replica: int, key, *ops, session=None):
        session = session or Session(f'client-{replica}')
        txn = self.replicas[replica].begin(session)
        for op in ops:
            txn.update(key, op)
        return txn.commit()


@pytest.fixture
def cluster():
    return Cluster(2)


@pytest.fixture
def budget_cluster():
    return Cluster(3, counters={BUDGET: new_bounded(0, 4, [2, 1, 1])})


@pytest.fixture
def run_cli():
    """ Запускает CLI и возвращает (код выхода, вывод) """
    from replica_hub.cli.interface import CLI

    def run(*argv):
        out = io.StringIO()
        status = CLI(out=out).run(list(argv))
        return status, out.getvalue()

    yield run
    for name in (None, 'replica_hub.sim'):
        target = logging.getLogger(name)
        for handler in list(target.handlers):
            if isinstance(handler, RotatingFileHandler):
                target.removeHandler(handler)
                handler.close()
