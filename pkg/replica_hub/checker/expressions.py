"""
Модуль содержит язык выражений моделей приложений.

Выражение - подмножество синтаксиса Python, разбираемое модулем ast:
целая арифметика (+ - * // %), сравнения, in / not in,
and / or / not, имена переменных и параметров, константы,
литералы множеств/кортежей и функция len.
Всё остальное отклоняется при компиляции.
"""

import ast
import operator
from dataclasses import dataclass, field

from replica_hub.core.exceptions import ExpressionError

_BINARY = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
}

_COMPARE = {
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
    ast.In: lambda left, right: left in right,
    ast.NotIn: lambda left, right: left not in right,
}

_FUNCTIONS = {'len': len}


@dataclass(frozen=True)
class Expression:
    """
    Скомпилированное выражение.

    Атрибуты:
        source - исходный текст
        names - имена, от которых зависит значение
    """
    source: str
    tree: ast.Expression = field(repr=False, compare=False)
    names: frozenset[str] = frozenset()

    def evaluate(self, env: dict):
        """
        Вычисляет выражение в окружении имя -> значение.

        Выбрасывает:
            ExpressionError - неизвестное имя или ошибка вычисления
        """
        try:
            return _eval(self.tree.body, env)
        except ExpressionError:
            raise
        except (TypeError, ValueError, ZeroDivisionError) as e:
            raise ExpressionError(self.source, str(e))
        except _UnknownName as e:
            raise ExpressionError(self.source, f"неизвестное имя '{e.name}'")

    def __str__(self):
        return self.source


class _UnknownName(Exception):
    def __init__(self, name):
        self.name = name
        super().__init__(name)


def compile_expression(source) -> Expression:
    """
    Разбирает и проверяет выражение.
    Числа и булевы значения допускаются как готовые выражения-константы.

    Выбрасывает:
        ExpressionError - синтаксическая ошибка или запрещённая конструкция
    """
    if isinstance(source, bool) or isinstance(source, int):
        source = repr(source)
    if not isinstance(source, str) or not source.strip():
        raise ExpressionError(str(source), 'ожидалась непустая строка')
    try:
        tree = ast.parse(source.strip(), mode='eval')
    except SyntaxError as e:
        raise ExpressionError(source, f'синтаксическая ошибка: {e.msg}')
    names = set()
    _validate(tree.body, source, names)
    return Expression(source.strip(), tree, frozenset(names))


def _validate(node, source: str, names: set):
    match node:
        case ast.Constant(value=value):
            if not isinstance(value, (int, str, bool)):
                raise ExpressionError(
                    source, f'недопустимая константа {value!r}'
                )
        case ast.Name(id=name):
            if name not in _FUNCTIONS:
                names.add(name)
        case ast.BoolOp(values=values):
            for value in values:
                _validate(value, source, names)
        case ast.UnaryOp(op=ast.Not() | ast.USub(), operand=operand):
            _validate(operand, source, names)
        case ast.BinOp(op=op, left=left, right=right) if type(op) in _BINARY:
            _validate(left, source, names)
            _validate(right, source, names)
        case ast.Compare(left=left, ops=ops, comparators=comparators):
            if any(type(op) not in _COMPARE for op in ops):
                raise ExpressionError(source, 'недопустимое сравнение')
            _validate(left, source, names)
            for comparator in comparators:
                _validate(comparator, source, names)
        case ast.Call(func=ast.Name(id=func), args=args, keywords=[]) \
                if func in _FUNCTIONS:
            for arg in args:
                _validate(arg, source, names)
        case ast.Set(elts=elts) | ast.Tuple(elts=elts) | ast.List(elts=elts):
            for elt in elts:
                _validate(elt, source, names)
        case ast.IfExp(test=test, body=body, orelse=orelse):
            for part in (test, body, orelse):
                _validate(part, source, names)
        case _:
            raise ExpressionError(
                source, f'недопустимая конструкция {type(node).__name__}'
            )


def _eval(node, env: dict):
    match node:
        case ast.Constant(value=value):
            return value
        case ast.Name(id=name):
            if name not in env:
                raise _UnknownName(name)
            return env[name]
        case ast.BoolOp(op=ast.And(), values=values):
            return all(_eval(value, env) for value in values)
        case ast.BoolOp(op=ast.Or(), values=values):
            return any(_eval(value, env) for value in values)
        case ast.UnaryOp(op=ast.Not(), operand=operand):
            return not _eval(operand, env)
        case ast.UnaryOp(op=ast.USub(), operand=operand):
            return -_eval(operand, env)
        case ast.BinOp(op=op, left=left, right=right):
            return _BINARY[type(op)](_eval(left, env), _eval(right, env))
        case ast.Compare(left=left, ops=ops, comparators=comparators):
            current = _eval(left, env)
            for op, comparator in zip(ops, comparators):
                right = _eval(comparator, env)
                if not _COMPARE[type(op)](current, right):
                    return False
                current = right
            return True
        case ast.Call(func=ast.Name(id=func), args=args):
            return _FUNCTIONS[func](*(_eval(arg, env) for arg in args))
        case ast.Set(elts=elts):
            return frozenset(_eval(elt, env) for elt in elts)
        case ast.Tuple(elts=elts) | ast.List(elts=elts):
            return tuple(_eval(elt, env) for elt in elts)
        case ast.IfExp(test=test, body=body, orelse=orelse):
            return _eval(body if _eval(test, env) else orelse, env)
    raise ExpressionError(ast.unparse(node), 'не поддерживается')
