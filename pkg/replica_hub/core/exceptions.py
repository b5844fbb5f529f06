class ReplicaHubError(Exception):
    """ Базовое исключение для пользовательских исключений """
    pass

class NoContentError(ReplicaHubError):
    """ Исключение, возникающее при отсутствии контента в файле / его части """
    def __init__(self, filepath):
        self.filepath = filepath
        message = ((f'Не удалось загрузить контент из файла {filepath}.\n'
                   'Возможно, запрашиваемая информация отсутствует.'))
        super().__init__(message)

class UnknownTypeError(ReplicaHubError):
    """ Исключение, возникающее при неизвестном тэге типа CRDT """
    def __init__(self, type_tag):
        self.type_tag = type_tag
        super().__init__(f"Неизвестный тип объекта: '{type_tag}'.")

class TypeMismatchError(ReplicaHubError):
    """
    Исключение, возникающее, если эффект или операция не подходит
    к типу состояния.

    Атрибуты:
        expected - ожидаемый тип
        actual - фактический тип
    """
    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"Несовпадение типов: ожидался '{expected}', получен '{actual}'."
        )

class InsufficientRightsError(ReplicaHubError):
    """
    Исключение, возникающее, если у реплики недостаточно прав
    (локальной доли) для уменьшения счетчика или передачи прав.

    Атрибуты:
        available:int - доступные реплике права
        replica:int - идентификатор реплики
        required:int - необходимое количество прав
    """
    def __init__(self, available:int, replica:int, required:int):
        self.available = available
        self.replica = replica
        self.required = required
        message = (f"Недостаточно прав у реплики {replica}: "
                   f"доступно {available}, требуется {required}")
        super().__init__(message)

class CounterConfigError(ReplicaHubError):
    """ Исключение, возникающее при неверных параметрах Bounded Counter """
    def __init__(self, reason:str):
        self.reason = reason
        super().__init__(f"Неверная конфигурация счетчика: {reason}")

class ClockNotCoveredError(ReplicaHubError):
    """
    Исключение, возникающее при запросе снимка, который реплика
    еще не применила.
    """
    def __init__(self, requested, applied):
        self.requested = requested
        self.applied = applied
        super().__init__(
            f"Снимок {requested} не покрыт применённым состоянием {applied}."
        )

class TxnStateError(ReplicaHubError):
    """ Исключение, возникающее при операции над незакрытой/закрытой транзакцией """
    def __init__(self, txn_id, status:str):
        self.txn_id = txn_id
        self.status = status
        super().__init__(
            f"Транзакция {txn_id} находится в состоянии '{status}'."
        )

class TokenConflictError(ReplicaHubError):
    """
    Исключение, возникающее при фиксации транзакции, которая пишет
    в объект, токен которого удерживает другая транзакция.
    """
    def __init__(self, key, holder):
        self.key = key
        self.holder = holder
        super().__init__(
            f"Объект {key} защищен токеном транзакции {holder}. "
            "Транзакция отменена."
        )

class TokenNotHeldError(ReplicaHubError):
    """ Исключение, возникающее при освобождении неудерживаемого токена """
    def __init__(self, key, replica):
        self.key = key
        self.replica = replica
        super().__init__(f"Реплика {replica} не удерживает токен объекта {key}.")

class PartitionFormatError(ReplicaHubError):
    """ Исключение, возникающее при неверном описании разбиения сети """
    def __init__(self, groups, reason:str):
        self.groups = groups
        super().__init__(f"Неверное разбиение сети {groups}: {reason}")

class ScenarioFormatError(ReplicaHubError):
    """ Исключение, возникающее при ошибке разбора сценария """
    def __init__(self, reason:str, source:str = None):
        self.reason = reason
        self.source = source
        message = 'Ошибка формата сценария'
        if source:
            message += f" ({source})"
        super().__init__(f"{message}: {reason}")

class NotQuiescentError(ReplicaHubError):
    """ Исключение, возникающее при проверке сходимости до затухания системы """
    def __init__(self):
        super().__init__(
            "Проверка сходимости возможна только в состоянии покоя системы."
        )

class ModelFormatError(ReplicaHubError):
    """ Исключение, возникающее при ошибке в описании модели приложения """
    def __init__(self, reason:str, source:str = None):
        self.reason = reason
        self.source = source
        message = 'Ошибка формата модели'
        if source:
            message += f" ({source})"
        super().__init__(f"{message}: {reason}")

class ExpressionError(ReplicaHubError):
    """ Исключение, возникающее при разборе/вычислении выражения модели """
    def __init__(self, expression:str, reason:str):
        self.expression = expression
        self.reason = reason
        super().__init__(f"Ошибка в выражении '{expression}': {reason}")

class StateSpaceTooLargeError(ReplicaHubError):
    """
    Исключение, возникающее, если пространство состояний модели
    превышает заданный лимит.

    Атрибуты:
        estimate:int - оценка числа проверяемых комбинаций
        cap:int - лимит из настроек (max_states)
    """
    def __init__(self, estimate:int, cap:int):
        self.estimate = estimate
        self.cap = cap
        super().__init__(
            f"Пространство состояний слишком велико: ~{estimate} "
            f"комбинаций при лимите {cap}."
        )

class PrescriptionNotFoundError(ReplicaHubError):
    """ Исключение, возникающее, если рецепт не виден в снимке транзакции """
    def __init__(self, prescription_id:str):
        self.prescription_id = prescription_id
        super().__init__(f"Рецепт '{prescription_id}' не найден в снимке.")

class UnknownDemoError(ReplicaHubError):
    """ Исключение, возникающее при запросе неизвестной демонстрации """
    def __init__(self, name:str, available):
        self.name = name
        super().__init__(
            f"Демонстрация '{name}' не существует. "
            f"Доступные: {', '.join(available)}"
        )
