import argparse
import json
import logging
import sys

from replica_hub.checker.checks import check_all
from replica_hub.checker.loader import load_model
from replica_hub.core.exceptions import (
    ModelFormatError,
    ReplicaHubError,
    ScenarioFormatError,
    StateSpaceTooLargeError,
    UnknownDemoError,
)
from replica_hub.core.store import ABLATIONS
from replica_hub.infra.settings import get_settings
from replica_hub.infra.storage import TraceStorage, read_json, resolve
from replica_hub.logging_config import setup_logging
from replica_hub.sim.config import PROCESS_MODES
from replica_hub.sim.runtime import run_scenario
from replica_hub.sim.scenarios import Scenario, get_demo, random_scenario

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_TOO_LARGE = 0, 1, 2, 3

# Категории трассы, которые показывает demo, и их подписи
ANNOTATIONS = {
    'op': 'операция',
    'result': 'результат',
    'commit': 'фиксация',
    'abort': 'откат',
    'partition': 'разбиение сети',
    'heal': 'восстановление сети',
    'token': 'токен',
    'rights': 'права счетчика',
    'blocked': 'БЛОКИРОВКА',
    'unblocked': 'разблокировка',
    'violation': 'НАРУШЕНИЕ ХРАНИЛИЩА',
    'failure': 'НАРУШЕНИЕ',
    'assert': 'утверждение',
}


def parse_ablations(value: str) -> tuple[str, ...]:
    """ --ablate no-causal-deps,no-snapshots """
    items = tuple(item.strip() for item in value.split(',') if item.strip())
    unknown = [item for item in items if item not in ABLATIONS]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"неизвестные абляции: {', '.join(unknown)}. "
            f"Допустимые: {', '.join(ABLATIONS)}"
        )
    return items


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='replica-hub',
        description='Реплицированное CRDT-хранилище с TCC: симулятор и проверка'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='исполнить сценарий')
    run.add_argument('scenario', help='путь к JSON-файлу или имя из data/scenarios')
    run.add_argument('--seed', type=int, default=None)
    run.add_argument('--trace', default=None, help='файл для трассы')
    run.add_argument('--ablate', type=parse_ablations, default=None)
    run.add_argument('--process-mode', choices=PROCESS_MODES, default=None)
    run.add_argument('--json', action='store_true', help='итог в JSON')

    check = commands.add_parser('check', help='проверить модель приложения')
    check.add_argument('model', help='путь к TOML-файлу или имя из data/models')
    check.add_argument('--strict', action='store_true',
                       help='любая отмена предусловия - контрпример')
    check.add_argument('--json', action='store_true', help='отчёт в JSON')

    demo = commands.add_parser('demo', help='встроенная демонстрация')
    demo.add_argument('name')
    demo.add_argument('--seed', type=int, default=None)
    demo.add_argument('--trace', default=None, help='файл для трассы')
    demo.add_argument('--full', action='store_true',
                      help='показать все события трассы')

    fuzz = commands.add_parser('fuzz', help='случайные сценарии сходимости')
    fuzz.add_argument('--runs', type=int, default=100)
    fuzz.add_argument('--seed', type=int, default=0)
    return parser


class CLI:
    def __init__(self, out=None):
        self.out = out or sys.stdout
        self.settings = get_settings()

    def print(self, *lines):
        for line in lines:
            print(line, file=self.out)

    def run(self, argv=None) -> int:
        """ Разбирает аргументы и исполняет подкоманду; возвращает код выхода """
        setup_logging()
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE

        try:
            match args.command:
                case 'run':
                    return self.run_command(args)
                case 'check':
                    return self.check_command(args)
                case 'demo':
                    return self.demo_command(args)
                case 'fuzz':
                    return self.fuzz_command(args)
        except StateSpaceTooLargeError as e:
            self.print(f'Ошибка: {e}')
            return EXIT_TOO_LARGE
        except FileNotFoundError as e:
            self.print(f'Ошибка: файл не найден: {e.filename}')
            return EXIT_USAGE
        except (ScenarioFormatError, ModelFormatError, UnknownDemoError) as e:
            self.print(f'Ошибка: {e}')
            return EXIT_USAGE
        except ReplicaHubError as e:
            logger.error(f'{args.command}: {e}')
            self.print(f'Сбой: {e}')
            return EXIT_FAILED
        return EXIT_USAGE

    # Подкоманды

    def run_command(self, args) -> int:
        path = resolve(args.scenario, self.settings.get_scenario_dir(), '.json')
        scenario = Scenario.from_dict(read_json(path), source=str(path))
        try:
            config = scenario.config(args.seed, args.ablate, args.process_mode)
        except ValueError as e:
            raise ScenarioFormatError(str(e), str(path))
        result = run_scenario(scenario, config)
        trace_path = TraceStorage().save(
            result.trace, args.trace, scenario.name, config.seed
        )
        if args.json:
            self.print(json.dumps(result.to_dict(), ensure_ascii=False, indent=4))
        else:
            self.print(*self.summary(scenario.name, config, result))
            self.print(f'Трасса: {trace_path}')
        return EXIT_OK if result.passed else EXIT_FAILED

    def check_command(self, args) -> int:
        path = resolve(args.model, self.settings.get_model_dir(), '.toml')
        model = load_model(path)
        report = check_all(model, strict=args.strict)
        if args.json:
            self.print(json.dumps(report.to_dict(), ensure_ascii=False, indent=4))
        else:
            self.print(report.render())
        return EXIT_OK if report.passed else EXIT_FAILED

    def demo_command(self, args) -> int:
        demo = get_demo(args.name)
        scenario = Scenario.from_dict(demo.build(), source=f'demo:{demo.name}')
        status = EXIT_OK
        for run in demo.runs:
            config = scenario.config(args.seed, run.ablations, run.process_mode)
            result = run_scenario(scenario, config)
            self.print(f'=== {demo.name}: {run.label} ===')
            self.print(*self.annotate(result.trace, args.full))
            self.print(*self.summary(scenario.name, config, result))
            if run.expect_pass is not None and result.passed != run.expect_pass:
                expected = 'успех' if run.expect_pass else 'нарушение'
                self.print(f'Ожидалось: {expected}')
                status = EXIT_FAILED
            if args.trace:
                suffix = '-'.join(run.ablations) or config.process_mode
                TraceStorage().save(result.trace, f'{args.trace}.{suffix}')
            self.print('')
        return status

    def fuzz_command(self, args) -> int:
        if args.runs < 1:
            self.print('Ошибка: --runs должен быть положительным')
            return EXIT_USAGE
        failed = 0
        for seed in range(args.seed, args.seed + args.runs):
            scenario = random_scenario(seed)
            result = run_scenario(scenario, record_trace=False)
            if not result.passed or not result.converged:
                failed += 1
                self.print(f'seed={seed}: ' + '; '.join(result.failures[:3]))
        self.print(f'Сценариев: {args.runs}, с ошибками: {failed}')
        return EXIT_OK if failed == 0 else EXIT_FAILED

    # Вывод

    @staticmethod
    def summary(name: str, config, result) -> list[str]:
        lines = [
            f"Сценарий '{name}' seed={config.seed} режим={config.process_mode} "
            f"абляции={','.join(sorted(config.ablations)) or '-'}",
        ]
        for pid, value in result.results.items():
            blocked = ' (был блокирован)' if pid in result.blocked else ''
            lines.append(f'  {pid}: {json.dumps(value, ensure_ascii=False)}'
                         f'{blocked}')
        lines.append(f'  сходимость: {result.converged}')
        for failure in result.failures:
            lines.append(f'  НАРУШЕНИЕ: {failure}')
        lines.append('Итог: ' + ('OK' if result.passed else 'FAIL'))
        return lines

    @staticmethod
    def annotate(trace: list[str], full: bool = False) -> list[str]:
        lines = []
        for encoded in trace:
            event = json.loads(encoded)
            label = ANNOTATIONS.get(event['cat'])
            if label is None and not full:
                continue
            where = 'сеть' if event['r'] is None else f"реплика {event['r']}"
            payload = json.dumps(event['payload'], ensure_ascii=False,
                                 sort_keys=True)
            lines.append(
                f"  t={event['t']:>4} {where:<10} {label or event['cat']}: "
                f'{payload}'
            )
        return lines


def main():
    """ Точка входа в CLI """
    sys.exit(CLI().run())


if __name__ == "__main__":
    main()
