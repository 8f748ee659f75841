"""
Главный координатор генерации.
Связывает конфигурацию, пайплайн, метрики и запись результатов на диск для CLI.
"""

import os
import logging
from dataclasses import replace
from typing import Any, Callable, Dict, Optional, Sequence

from .frame_io import read_frames, write_frames
from .metrics import consistency_metrics
from .pipeline import ablate, generate_video, inversion_report, metrics_mixture
from .report_formatter import ReportFormatter
from .settings import GenerationConfig, config_hash
from .types import AblationTable, MetricsReport, TraceRecord
from ..utils import format_shift, write_json


class VideoProcessor:
    """
    Главный класс для координации генерации видео.
    Запускает пайплайн, считает метрики и сохраняет кадры и JSON отчеты в выходную директорию.
    """

    def __init__(self, config: GenerationConfig,
                 trace_callback: Optional[Callable[[TraceRecord], None]] = None):
        """
        Инициализация процессора.

        :param config: Проверенная конфигурация
        :param trace_callback: Получатель записей трассы (например, SamplingTracer.record)
        """
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.trace_callback = trace_callback
        self.formatter = ReportFormatter()

        # Колбэк для отслеживания прогресса
        self.progress_callback: Optional[Callable[[int, int, str], None]] = None

    def set_progress_callback(self, callback: Callable[[int, int, str], None]) -> None:
        """
        Устанавливает колбэк для отслеживания прогресса абляции.

        :param callback: Функция с параметрами (current, total, variant)
        """
        self.progress_callback = callback

    def generate(self, out: Optional[str] = None) -> Dict[str, Any]:
        """
        Генерирует кадры, пишет frame_*.{pgm,png} и metrics.json.

        :param out: Выходная директория (по умолчанию из конфигурации)
        :return: Словарь с путями файлов и метриками
        """
        out = out or self.config.out
        self.logger.info(f"Генерация: m={self.config.frames}, T={self.config.t_start}, "
                         f"T′={self.config.t_mid}, δ={format_shift((self.config.delta_x, self.config.delta_y))}, "
                         f"λ={self.config.lam}, внимание={self.config.attn}, сглаживание={self.config.smoothing}")

        result = generate_video(self.config, self.trace_callback)
        report = consistency_metrics(result.frames, self.config.motion_field(), metrics_mixture(self.config),
                                     variant="full", seed=self.config.seed, config_hash=result.config_hash)

        paths = write_frames(result.frames, out, self.config.format)
        metrics_path = write_json(os.path.join(out, "metrics.json"),
                                  self.formatter.metrics_payload(report, result.frames.num_frames))

        self.logger.info(f"Метрики сохранены: {metrics_path}")
        return {"frames": paths, "metrics_path": metrics_path, "report": report, "result": result}

    def ablate(self, study: str = "components", out: Optional[str] = None) -> AblationTable:
        """
        Прогоняет абляцию и пишет ablation.json.

        :param study: 'components', 'dt' или 'smoothing'
        :param out: Выходная директория
        :return: Таблица абляции
        """
        out = out or self.config.out
        table = ablate(self.config, study, self.progress_callback)
        path = write_json(os.path.join(out, "ablation.json"), self.formatter.ablation_payload(table))
        self.logger.info(f"Таблица абляции сохранена: {path}")
        return table

    def invert(self, step_counts: Sequence[int] = (25, 50, 100), out: Optional[str] = None) -> Dict[str, float]:
        """
        Проверка инверсии DDIM, пишет inversion.json.

        :param step_counts: Размеры сеток
        :param out: Выходная директория
        :return: Словарь "шаги" -> ошибка
        """
        out = out or self.config.out
        errors = inversion_report(self.config, step_counts)
        write_json(os.path.join(out, "inversion.json"), {
            "config_hash": config_hash(self.config),
            "t_start": self.config.t_start,
            "errors": errors,
        })
        return errors

    def score(self, directory: str, out: Optional[str] = None) -> MetricsReport:
        """
        Считает метрики уже записанных кадров и пишет metrics.json.

        Кадры читаются как один канал, поле движения берется из конфигурации
        с числом кадров, равным числу файлов.

        :param directory: Директория с frame_*.pgm|png
        :param out: Куда писать metrics.json (по умолчанию та же директория)
        :return: Метрики
        """
        frames = read_frames(directory)
        scored_config = replace(self.config, frames=frames.num_frames)
        report = consistency_metrics(frames, scored_config.motion_field(), None, variant="scored",
                                     seed=None, config_hash=config_hash(scored_config))
        out = out or directory
        write_json(os.path.join(out, "metrics.json"), self.formatter.metrics_payload(report, frames.num_frames))
        self.logger.info(f"Оценено кадров: {frames.num_frames} из {directory}")
        return report
