"""
Форматирование результатов: metrics.json, ablation.json и таблицы rich для консоли.
"""

import logging
from typing import Any, Dict, List

from rich.table import Table

from .types import AblationTable, MetricsReport

METRIC_COLUMNS = ("inter_frame_mse", "warped_inconsistency", "mean_displacement")


class ReportFormatter:
    """
    Класс для форматирования метрик согласованности и таблиц абляции.
    """

    def __init__(self):
        """Инициализация форматтера отчетов."""
        self.logger = logging.getLogger(__name__)

    def metrics_payload(self, report: MetricsReport, num_frames: int) -> Dict[str, Any]:
        """
        Содержимое metrics.json с фиксированным набором ключей.

        :param report: Метрики варианта
        :param num_frames: Число кадров
        :return: Словарь для записи в JSON
        """
        payload = report.to_dict()
        payload["frames"] = num_frames
        return payload

    def ablation_payload(self, table: AblationTable) -> Dict[str, Any]:
        """
        Содержимое ablation.json: по строке на вариант и список сидов.

        :param table: Таблица абляции
        :return: Словарь для записи в JSON
        """
        self.logger.debug(f"Таблица абляции '{table.study}': вариантов {len(table.rows)}, сидов {len(table.seeds)}")
        return {
            "study": table.study,
            "config_hash": table.config_hash,
            "seeds": list(table.seeds),
            "rows": [{key: row.to_dict()[key] for key in ("variant",) + METRIC_COLUMNS} for row in table.rows],
        }

    def metrics_table(self, reports: List[MetricsReport], title: str = "Метрики согласованности") -> Table:
        """
        Таблица rich с метриками нескольких вариантов.

        :param reports: Строки таблицы
        :param title: Заголовок
        :return: Таблица для Console.print
        """
        table = Table(title=title)
        table.add_column("вариант", style="cyan")
        table.add_column("MSE соседних кадров", justify="right")
        table.add_column("рассогласование после W⁻¹", justify="right")
        table.add_column("средний сдвиг", justify="right")

        best = min(r.warped_inconsistency for r in reports) if reports else None
        for report in reports:
            style = "bold green" if report.warped_inconsistency == best and len(reports) > 1 else None
            table.add_row(
                report.variant,
                f"{report.inter_frame_mse:.5f}",
                f"{report.warped_inconsistency:.5f}",
                f"{report.mean_displacement:.3f}",
                style=style,
            )
        return table

    def ablation_table(self, table: AblationTable) -> Table:
        title = f"Абляция '{table.study}': медиана по {len(table.seeds)} сидам"
        return self.metrics_table(table.rows, title)

    def inversion_table(self, errors: Dict[str, float]) -> Table:
        table = Table(title="Инверсия DDIM: инверсия∘семплирование")
        table.add_column("шагов", justify="right", style="cyan")
        table.add_column("относительная L2 ошибка", justify="right")
        for steps, error in errors.items():
            table.add_row(steps, f"{error:.3e}")
        return table
