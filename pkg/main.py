"""
CLI точка входа генератора видео диффузией без обучения.
Подкоманды: generate, ablate, invert, metrics.
"""

import sys
import os
import argparse
import logging
from typing import Any, Dict, List, Optional

from tqdm import tqdm

# Корень репозитория в пути Python, чтобы импортировать пакет src
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

try:
    from rich.console import Console

    from src.core.errors import ConfigError
    from src.core.pipeline import ABLATION_STUDIES, ablation_jobs
    from src.core.settings import GenerationConfig, apply_overrides, load_generation_config, validate_config
    from src.core.video_processor import VideoProcessor
    from src.debug_tracer import SamplingTracer
except ImportError as e:
    print(f"Ошибка импорта core компонентов: {e}")
    print("Убедитесь, что все зависимости установлены: pip install -r requirements.txt")
    sys.exit(1)

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_USAGE_ERROR = 2

# Атрибут argparse -> ключ конфигурации
OVERRIDE_KEYS = {
    "seed": "seed",
    "frames": "frames",
    "lam": "lambda",
    "delta_x": "delta_x",
    "delta_y": "delta_y",
    "dt": "dt",
    "t_start": "t_start",
    "t_mid": "t_mid",
    "smooth_alpha": "smooth_alpha",
    "attn": "attn",
    "out": "out",
    "format": "format",
    "num_seeds": "num_seeds",
}


def setup_logging(verbose: bool = False) -> None:
    """
    Настраивает систему логирования для CLI приложения.

    :param verbose: Включить подробный вывод
    """
    level = logging.DEBUG if verbose else logging.INFO

    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stdout)
        ],
        force=True,
    )

    # Устанавливаем уровень для внешних библиотек
    logging.getLogger('PIL').setLevel(logging.WARNING)


def load_config(args: argparse.Namespace) -> GenerationConfig:
    """
    Собирает итоговую конфигурацию: значения по умолчанию <- --config <- флаги.

    :param args: Разобранные аргументы
    :return: Проверенная конфигурация
    :raises ConfigError: Если конфигурация некорректна
    """
    config = load_generation_config(args.config)
    overrides: Dict[str, Any] = {key: getattr(args, attr, None) for attr, key in OVERRIDE_KEYS.items()}
    if args.command != "invert":
        overrides["steps"] = args.steps
    return validate_config(apply_overrides(config, overrides))


class CliParser(argparse.ArgumentParser):
    """ArgumentParser, у которого ошибки разбора не завершают процесс, а возвращают код."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: ошибка: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE_ERROR)


def build_parser() -> argparse.ArgumentParser:
    """Парсер аргументов со всеми подкомандами."""
    common = CliParser(add_help=False)
    common.add_argument('--config', '-c', default=None,
                        help='Путь к JSON конфигурации (по умолчанию: встроенные значения)')
    common.add_argument('--seed', type=int, help='Сид генерации')
    common.add_argument('--frames', type=int, help='Число кадров m')
    common.add_argument('--lambda', dest='lam', type=float, help='Масштаб движения λ')
    common.add_argument('--delta-x', type=float, help='Направление δ по строкам')
    common.add_argument('--delta-y', type=float, help='Направление δ по столбцам')
    common.add_argument('--dt', type=int, help='Δt = T - T′')
    common.add_argument('--t-start', type=int, help='Стартовый шаг T')
    common.add_argument('--t-mid', type=int, help='Промежуточный шаг T′')
    common.add_argument('--smooth-alpha', type=float, help='Вес α сглаживания фона (включает сглаживание)')
    common.add_argument('--attn', choices=['self', 'cross'], help='Режим внимания: self или cross (межкадровое)')
    common.add_argument('--steps', type=int, help='Число шагов сетки DDIM')
    common.add_argument('--out', '-o', help='Выходная директория')
    common.add_argument('--format', choices=['pgm', 'png'], help='Формат кадров')
    common.add_argument('--verbose', '-v', action='store_true', help='Подробный вывод')

    parser = CliParser(
        prog='main.py',
        description='Генерация согласованных видеокадров диффузией без обучения',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры использования:

  # Конфигурация по умолчанию: m=8, T=941, T′=881, α=0.6
  python main.py generate --frames 8 --dt 60 --t-start 941 --t-mid 881 --smooth-alpha 0.6 --out out

  # Сетка абляции 2×2 (движение × межкадровое внимание)
  python main.py ablate --seed 7 --num-seeds 20

  # Проверка DDIM инверсии
  python main.py invert --config config.json

  # Метрики уже записанных кадров
  python main.py metrics out
        """)
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)

    generate_parser = subparsers.add_parser('generate', parents=[common], help='Сгенерировать кадры и metrics.json')
    generate_parser.add_argument('--trace', action='store_true', help='Писать trace.jsonl в выходную директорию')

    ablate_parser = subparsers.add_parser('ablate', parents=[common], help='Таблица абляции')
    ablate_parser.add_argument('--study', choices=list(ABLATION_STUDIES), default='components',
                               help='Тип абляции (по умолчанию: components)')
    ablate_parser.add_argument('--num-seeds', type=int, help='Число сидов для медианы')

    subparsers.add_parser('invert', parents=[common], help='Ошибка инверсия∘семплирование')

    metrics_parser = subparsers.add_parser('metrics', parents=[common], help='Метрики существующих кадров')
    metrics_parser.add_argument('directory', help='Директория с frame_*.pgm или frame_*.png')
    return parser


def create_progress_callback(total: int):
    """
    Создает колбэк прогресса на tqdm.

    :param total: Общее число запусков
    :return: (колбэк, полоса прогресса)
    """
    bar = tqdm(total=total, unit="запуск", leave=False)

    def progress_callback(current: int, total_jobs: int, variant: str):
        bar.set_description(variant)
        bar.update(current - bar.n)

    return progress_callback, bar


def run_cli(argv: Optional[List[str]] = None) -> int:
    """
    Выполняет CLI и возвращает код выхода.

    :param argv: Аргументы без имени программы
    :return: 0 - успех, 2 - ошибка использования или конфигурации, 1 - ошибка выполнения
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE_ERROR

    setup_logging(args.verbose)
    logger = logging.getLogger(__name__)
    console = Console()

    try:
        config = load_config(args)
    except ConfigError as e:
        print(f"❌ Ошибка конфигурации: {e}", file=sys.stderr)
        return EXIT_USAGE_ERROR

    tracer = None
    try:
        if getattr(args, 'trace', False):
            tracer = SamplingTracer(log_folder=config.out, enable_console=args.verbose)
        processor = VideoProcessor(config, tracer.record if tracer else None)

        if args.command == 'generate':
            summary = processor.generate()
            console.print(processor.formatter.metrics_table([summary["report"]]))
            console.print(f"✅ Кадров записано: {len(summary['frames'])} в {config.out}")

        elif args.command == 'ablate':
            callback, bar = create_progress_callback(len(ablation_jobs(config, args.study)[1]))
            processor.set_progress_callback(callback)
            try:
                table = processor.ablate(args.study)
            finally:
                bar.close()
            console.print(processor.formatter.ablation_table(table))

        elif args.command == 'invert':
            step_counts = [args.steps] if args.steps else [25, 50, 100]
            errors = processor.invert(step_counts)
            console.print(processor.formatter.inversion_table(errors))

        elif args.command == 'metrics':
            report = processor.score(args.directory, args.out)
            console.print(processor.formatter.metrics_table([report]))

        return EXIT_OK

    except KeyboardInterrupt:
        print("\n🛑 Обработка остановлена пользователем", file=sys.stderr)
        return EXIT_RUNTIME_ERROR

    except Exception as e:
        logger.error(f"Критическая ошибка: {e}")
        if args.verbose:
            import traceback
            print(f"Трассировка:\n{traceback.format_exc()}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR

    finally:
        if tracer is not None:
            tracer.close()


def main() -> int:
    """Главная функция CLI приложения."""
    return run_cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
