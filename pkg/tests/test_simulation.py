import json

import pytest

from replica_hub.core.exceptions import (
    NotQuiescentError,
    ScenarioFormatError,
    TypeMismatchError,
)
from replica_hub.core.store import Replica
from replica_hub.sim.runtime import Simulation, run_scenario
from replica_hub.sim.scenarios import Scenario, builtin_scenario

KEY = ['reg', 'shared', 'register']
COUNTER = ['cnt', 'hits', 'counter']


def scenario(steps, replicas=3, **extra):
    data = {'name': 'test', 'replicas': replicas, 'seed': 0, 'delay': [1, 5],
            'steps': steps}
    data.update(extra)
    return Scenario.from_dict(data)


def test_same_seed_gives_identical_trace():
    first = run_scenario(builtin_scenario('buggydb2'))
    second = run_scenario(builtin_scenario('buggydb2'))
    assert first.trace == second.trace
    assert first.results == second.results


def test_trace_lines_are_canonical_json():
    result = run_scenario(builtin_scenario('password'))
    for line in result.trace:
        event = json.loads(line)
        assert set(event) == {'t', 'r', 'cat', 'payload'}
        assert json.dumps(event, sort_keys=True, separators=(',', ':'),
                          ensure_ascii=False) == line


def test_trace_can_be_skipped():
    result = run_scenario(builtin_scenario('password'), record_trace=False)
    assert result.trace == []
    assert result.passed


def test_updates_stay_available_under_partition():
    steps = [{'partition': [[0], [1], [2]]}]
    steps += [
        {'op': 'update', 'replica': r, 'id': f'w{r}',
         'writes': [[COUNTER, ['add', r + 1]], [KEY, ['assign', r]]]}
        for r in range(3)
    ]
    steps += [{'advance': None}]
    steps += [{'assert': 'result', 'id': f'w{r}', 'equals': 'committed'}
              for r in range(3)]
    steps += [
        {'assert': 'value', 'replica': 0, 'key': COUNTER, 'equals': 1},
        {'heal': True},
        {'advance': None},
        {'assert': 'converged'},
        {'assert': 'value', 'replica': 1, 'key': COUNTER, 'equals': 6},
        {'assert': 'value', 'replica': 0, 'key': KEY, 'equals': 2},
    ]
    result = run_scenario(scenario(steps))
    assert result.passed, result.failures
    assert result.blocked == {}
    assert result.converged is True


def test_protected_update_blocks_across_partition():
    steps = [
        {'partition': [[0], [1]]},
        {'op': 'protected-update', 'replica': 0, 'id': 'left',
         'writes': [[KEY, ['assign', 'left']]]},
        {'op': 'protected-update', 'replica': 1, 'id': 'right',
         'writes': [[KEY, ['assign', 'right']]]},
        {'advance': None},
        {'heal': True},
        {'advance': None},
        {'assert': 'result', 'id': 'left', 'equals': 'committed'},
        {'assert': 'result', 'id': 'right', 'equals': 'committed'},
        {'assert': 'converged'},
    ]
    result = run_scenario(scenario(steps, replicas=2))
    assert result.passed, result.failures
    assert len(result.blocked) == 1
    assert list(result.blocked.values()) == [['token']]


def test_think_time_moves_clock():
    steps = [
        {'op': 'update', 'replica': 0, 'id': 'slow', 'think': 7,
         'writes': [[COUNTER, ['add', 1]]]},
        {'advance': 3},
        {'assert': 'value', 'replica': 0, 'key': COUNTER, 'equals': 0},
        {'advance': None},
        {'assert': 'value', 'replica': 2, 'key': COUNTER, 'equals': 1},
    ]
    result = run_scenario(scenario(steps))
    assert result.passed, result.failures


def test_failed_assertion_is_reported():
    steps = [
        {'op': 'update', 'replica': 0, 'writes': [[KEY, ['assign', 1]]]},
        {'advance': None},
        {'assert': 'value', 'replica': 1, 'key': KEY, 'equals': 2},
    ]
    result = run_scenario(scenario(steps))
    assert not result.passed
    assert result.failures[0].startswith('утверждение value')


def test_convergence_requires_quiescence():
    single = scenario([
        {'op': 'update', 'replica': 0, 'writes': [[KEY, ['assign', 1]]]},
    ])
    sim = Simulation(single, single.config())
    sim.execute(single.steps[0], 0)
    assert not sim.quiescent()
    with pytest.raises(NotQuiescentError):
        sim.check_convergence()


def test_operation_errors_become_results():
    steps = [
        {'op': 'update-prescription-medication', 'replica': 0, 'id': 'ghost',
         'prescription': 'missing', 'med': 'Aspirin', 'delta': 1},
        {'advance': None},
    ]
    result = run_scenario(scenario(steps))
    assert result.results['ghost']['error'] == 'PrescriptionNotFoundError'


def test_concurrent_retype_of_map_field_converges():
    record = ['rec', 'm', 'map']
    steps = [
        {'op': 'update', 'replica': 0,
         'writes': [[record, ['update', 'x', 'counter', ['add', 1]]]]},
        {'op': 'update', 'replica': 1,
         'writes': [[record, ['update', 'x', 'set', ['add', 'v']]]]},
        {'advance': None},
        {'assert': 'converged'},
    ]
    result = run_scenario(scenario(steps, replicas=2))
    assert result.passed, result.failures
    assert result.converged is True


def test_delivery_fault_becomes_failure(monkeypatch):
    def broken(self, record):
        raise TypeMismatchError('set', 'counter')

    monkeypatch.setattr(Replica, 'receive', broken)
    steps = [
        {'op': 'update', 'replica': 0, 'writes': [[KEY, ['assign', 1]]]},
        {'advance': None},
    ]
    result = run_scenario(scenario(steps, replicas=2))
    assert not result.passed
    assert result.failures[0].startswith(
        'сбой при обработке события deliver: TypeMismatchError'
    )


@pytest.mark.parametrize('data', [
    {'replicas': 0, 'steps': []},
    {'replicas': 2, 'delay': [3, 1], 'steps': []},
    {'replicas': 2, 'steps': [{'op': 'fly', 'replica': 0}]},
    {'replicas': 2, 'steps': [{'op': 'update', 'replica': 5,
                               'writes': [[KEY, ['assign', 1]]]}]},
    {'replicas': 2, 'steps': [{'op': 'bc-increment', 'replica': 0,
                               'key': ['b', 'x', 'bcounter']}]},
    {'replicas': 2, 'steps': [{'partition': [[0], [0, 1]]}]},
    {'replicas': 2, 'steps': [{'assert': 'eventually'}]},
    {'replicas': 2, 'steps': [{'heal': True, 'advance': 1}]},
    {'replicas': 2, 'steps': [
        {'op': 'read', 'replica': 0, 'id': 'x', 'keys': [KEY]},
        {'op': 'read', 'replica': 1, 'id': 'x', 'keys': [KEY]},
    ]},
    {'replicas': 2, 'counters': [{'key': ['b', 'x', 'bcounter'], 'k': 0,
                                  'initial': 2, 'shares': [2]}], 'steps': []},
    {'replicas': 2, 'monitors': [{'type': 'psychic'}], 'steps': []},
])
def test_bad_scenario_format(data):
    with pytest.raises(ScenarioFormatError):
        Scenario.from_dict(data, source='test')


def test_config_overrides():
    base = builtin_scenario('duplicate-delivery')
    config = base.config(seed=42, ablations=('no-snapshots',), process_mode='cp')
    assert (config.seed, config.process_mode) == (42, 'cp')
    assert config.ablations == frozenset({'no-snapshots'})
    assert base.config().seed == 4
    assert (base.config().delay_min, base.config().delay_max) == (1, 3)
