from dataclasses import dataclass, field

from replica_hub.core.store import ABLATIONS
from replica_hub.infra.settings import get_settings

PROCESS_MODES = ('cp', 'best-effort')


@dataclass
class SimConfig:
    """
    Конфигурация одного прогона симулятора.

    Собирается из сценария, флагов CLI и настроек по умолчанию
    ([tool.replica_hub]).
    """
    replicas: int = 3
    seed: int = 0
    delay_min: int = 1
    delay_max: int = 5
    duplication: float = 0.0
    fifo: bool = False
    ablations: frozenset = field(default_factory=frozenset)
    process_mode: str = 'best-effort'
    max_ticks: int = 100000

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError('Количество реплик должно быть положительным.')
        if self.delay_min < 0 or self.delay_max < self.delay_min:
            raise ValueError(
                f'Неверный диапазон задержек [{self.delay_min}, {self.delay_max}]'
            )
        if not 0.0 <= self.duplication <= 1.0:
            raise ValueError('Вероятность дублирования должна быть в [0, 1].')
        unknown = set(self.ablations) - set(ABLATIONS)
        if unknown:
            raise ValueError(
                f"Неизвестные абляции: {', '.join(sorted(unknown))}. "
                f"Допустимые: {', '.join(ABLATIONS)}"
            )
        self.ablations = frozenset(self.ablations)
        if self.process_mode not in PROCESS_MODES:
            raise ValueError(
                f"Неизвестный режим '{self.process_mode}'. "
                f"Допустимые: {', '.join(PROCESS_MODES)}"
            )

    @classmethod
    def from_settings(cls, **overrides):
        """ Создает конфигурацию со значениями по умолчанию из настроек """
        settings = get_settings()
        delay_min, delay_max = settings.get_delay_range()
        values = {
            'seed': settings.get('default_seed'),
            'delay_min': delay_min,
            'delay_max': delay_max,
            'max_ticks': settings.get('max_ticks'),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
