import os
import json
import tempfile
import threading
from dataclasses import asdict
from typing import Any, Dict, Optional

from rich.console import Console

from src.core.types import TraceRecord


class SamplingTracer:
    """
    Трассировщик шагов семплирования.
    Обеспечивает двойной вывод: строка в консоли на каждый шаг DDIM и
    запись в JSONL-файл на каждую пару (шаг, кадр) для последующего анализа.
    Временные метки не пишутся, чтобы трасса повторялась бит в бит.
    """

    def __init__(
        self,
        log_folder: Optional[str] = None,
        enable_console: bool = True,
        file_name: str = "trace.jsonl",
    ):
        """
        Инициализирует трассировщик.

        :param log_folder: Директория для trace.jsonl; None - только консоль
        :param enable_console: Включить форматированный вывод в консоль
        :param file_name: Имя файла трассы
        """
        self.log_file: Optional[str] = None
        if log_folder is not None:
            try:
                abs_log_folder = os.path.abspath(log_folder)
                os.makedirs(abs_log_folder, exist_ok=True)
            except (IOError, PermissionError) as e:
                abs_log_folder = tempfile.gettempdir()
                print(f"Ошибка при создании директории {log_folder}: {e}. Используется временная директория: {abs_log_folder}")
            self.log_file = os.path.join(abs_log_folder, file_name)
            # Каждый запуск начинает трассу заново
            open(self.log_file, "w", encoding="utf-8").close()

        self.console = Console() if enable_console else None
        self.record_counter = 0
        self._lock = threading.Lock()
        self._current_step: Optional[int] = None
        self._step_norms: list = []

        if self.console and self.log_file:
            self.console.print(f"[bold green]Трассировщик инициализирован[/] 📊")
            self.console.print(f"Трасса сохраняется в: [italic]{self.log_file}[/]")

    def record(self, record: TraceRecord) -> None:
        """
        Записывает одну запись трассы.

        :param record: Запись (шаг, кадр)
        """
        entry = asdict(record)
        entry["record_id"] = self.record_counter

        with self._lock:
            if self.log_file:
                try:
                    with open(self.log_file, "a", encoding="utf-8") as f:
                        f.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
                except OSError as e:
                    if self.console:
                        self.console.print(f"[bold red]Ошибка записи трассы: {e}[/]")

            if self.console:
                self._collect_for_console(entry)
            self.record_counter += 1

    def _collect_for_console(self, entry: Dict[str, Any]) -> None:
        # Строка выводится, когда начинается следующий шаг
        if self._current_step is not None and entry["step"] != self._current_step:
            self._flush_step()
        self._current_step = entry["step"]
        self._step_norms.append(entry)

    def _flush_step(self) -> None:
        if not self._step_norms:
            return
        first = self._step_norms[0]
        latent = max(e["latent_norm"] for e in self._step_norms)
        eps = max(e["eps_norm"] for e in self._step_norms)
        mark = " [yellow]сглаживание[/]" if first["smoothed"] else ""
        self.console.print(
            f"[cyan]шаг {first['step']:>3}[/] t={first['t']:>4} → {first['t_prev']:>4}  "
            f"кадров={len(self._step_norms)}  max‖x‖={latent:.3f}  max‖ε̂‖={eps:.3f}{mark}"
        )
        self._step_norms = []

    def close(self) -> None:
        """Выводит последний накопленный шаг."""
        with self._lock:
            if self.console:
                self._flush_step()
            self._current_step = None

    def __enter__(self) -> "SamplingTracer":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()
