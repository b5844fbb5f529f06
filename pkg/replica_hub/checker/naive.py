"""
Независимый перебор для сверки вердиктов проверки моделей.

Не использует prepare/apply модели: каждая пара операций
разыгрывается на двух репликах с собственным представлением
множеств (элемент -> метки) и LWW-регистров ({value, stamp}).
Возвращает только вердикты.
"""

import copy
import itertools

from replica_hub.checker.model import AppModel


def _all_states(variables, index=0, partial=None):
    partial = partial or {}
    if index == len(variables):
        yield dict(partial)
        return
    var = variables[index]
    for value in var.domain.values:
        partial[var.name] = value
        yield from _all_states(variables, index + 1, partial)
    partial.pop(var.name, None)


def _instances(op):
    names = [name for name, _ in op.params]
    domains = [list(domain.values) for _, domain in op.params]
    for values in itertools.product(*domains):
        yield dict(zip(names, values))


class _Replica:
    """ Реплика с полным (теговым) состоянием модели """
    def __init__(self, model: AppModel, state: dict):
        self.model = model
        self.data = {}
        for name, value in state.items():
            kind = model.kinds[name]
            if kind == 'set':
                self.data[name] = {element: {('base',)} for element in value}
            elif kind == 'lww':
                self.data[name] = {'value': value, 'stamp': (0, 0)}
            else:
                self.data[name] = value

    def clone(self):
        other = copy.copy(self)
        other.data = copy.deepcopy(self.data)
        return other

    def visible(self) -> dict:
        out = {}
        for name, value in self.data.items():
            kind = self.model.kinds[name]
            if kind == 'set':
                out[name] = frozenset(e for e, tags in value.items() if tags)
            elif kind == 'lww':
                out[name] = value['value']
            else:
                out[name] = value
        return out

    def generate(self, op, params, origin: int) -> list:
        """ Операция у источника: список сообщений-эффектов """
        env = dict(self.visible())
        env.update(params)
        messages = []
        for effect in op.effects:
            value = effect.value.evaluate(env)
            message = {'kind': effect.kind, 'var': effect.var, 'value': value}
            if effect.kind == 'insert':
                message['tag'] = ('op', origin, op.name, repr(sorted(params.items())))
            elif effect.kind == 'remove':
                message['seen'] = set(self.data[effect.var].get(value, set()))
            elif effect.kind == 'assign-lww':
                message['stamp'] = (1, origin)
            messages.append(message)
        return messages

    def deliver(self, messages):
        for m in messages:
            var = m['var']
            if m['kind'] == 'add':
                self.data[var] = self.data[var] + m['value']
            elif m['kind'] == 'insert':
                self.data[var].setdefault(m['value'], set()).add(m['tag'])
            elif m['kind'] == 'remove':
                tags = self.data[var].get(m['value'], set())
                self.data[var][m['value']] = tags - m['seen']
            elif m['kind'] == 'assign-lww':
                if m['stamp'] > self.data[var]['stamp']:
                    self.data[var] = {'value': m['value'], 'stamp': m['stamp']}
            else:
                self.data[var] = m['value']


def _ok(model, state) -> bool:
    return all(predicate.evaluate(state) for _, predicate in model.invariants)


def _pre(op, state, params) -> bool:
    if op.pre is None:
        return True
    env = dict(state)
    env.update(params)
    return bool(op.pre.evaluate(env))


def naive_verdicts(model: AppModel, strict: bool = False) -> dict[str, bool]:
    """ Вердикты трёх проверок: True - пройдена """
    individual = convergence = stability = True
    pairs = [(op, params) for op in model.operations for params in _instances(op)]

    for state in _all_states(list(model.variables)):
        if not _ok(model, state):
            continue
        base = _Replica(model, state)

        for op, params in pairs:
            if not _pre(op, state, params):
                continue
            solo = base.clone()
            solo.deliver(solo.generate(op, params, 1))
            if not _ok(model, solo.visible()):
                individual = False

        for (op1, p1), (op2, p2) in itertools.product(pairs, repeat=2):
            concurrent = (op1.name, op2.name) not in model.ordered \
                and (op2.name, op1.name) not in model.ordered
            if not concurrent:
                continue
            if not _pre(op1, state, p1) or not _pre(op2, state, p2):
                continue
            left, right = base.clone(), base.clone()
            m1 = left.generate(op1, p1, 1)
            m2 = right.generate(op2, p2, 2)
            left.deliver(m1)
            right.deliver(m2)
            # обмен эффектами
            left.deliver(m2)
            right.deliver(m1)
            if left.visible() != right.visible():
                convergence = False

            if frozenset((op1.name, op2.name)) in model.sync_pairs:
                continue
            after_second = base.clone()
            after_second.deliver(m2)
            if _pre(op1, after_second.visible(), p1):
                continue
            after_second.deliver(m1)
            if strict or not _ok(model, after_second.visible()):
                stability = False

    return {
        'individual': individual,
        'convergence': convergence,
        'stability': stability,
    }
