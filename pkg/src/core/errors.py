"""
Исключения ядра генерации видео.
Все модули поднимают только эти классы, CLI отображает их в коды возврата.
"""

from typing import Optional


class ParameterError(ValueError):
    """Некорректные аргументы или нарушенные предусловия операции."""
    pass


class DegenerateNoiseError(ParameterError):
    """Оракул вызван на шаге, где уровень шума равен нулю (1 - ᾱ_t = 0)."""
    pass


class ConditioningError(ParameterError):
    """Неизвестная метка условия (conditioning label)."""
    pass


class NumericError(ArithmeticError):
    """Во входных данных или промежуточных результатах появились не конечные значения."""
    pass


class ConfigError(ValueError):
    """Невалидная или противоречивая конфигурация генерации."""
    pass


class PipelineError(RuntimeError):
    """
    Ошибка внутри конвейера генерации с контекстом шага.

    :param message: Описание ошибки
    :param stage: Этап конвейера ('motion', 'sampling', 'smoothing', ...)
    :param timestep: Шаг диффузии, на котором произошла ошибка (если известен)
    """

    def __init__(self, message: str, stage: str, timestep: Optional[int] = None):
        self.stage = stage
        self.timestep = timestep
        context = f"[{stage}" + (f", t={timestep}]" if timestep is not None else "]")
        super().__init__(f"{context} {message}")
