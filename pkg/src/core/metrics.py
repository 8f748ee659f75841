"""
Метрики временной согласованности сгенерированных кадров.
"""

import math
import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy import fft

from .errors import ParameterError
from .motion import inverse_shift, translation_flow, warp_array
from .types import LatentSequence, MetricsReport, MixtureModel, MotionField

logger = logging.getLogger(__name__)


def inter_frame_mse(frames: np.ndarray) -> float:
    """Среднее MSE между соседними кадрами; 0 для одного кадра."""
    if frames.shape[0] < 2:
        return 0.0
    diffs = frames[1:] - frames[:-1]
    return float(np.mean((diffs ** 2).reshape(frames.shape[0] - 1, -1).mean(axis=1)))


def warped_inconsistency(frames: np.ndarray, field: MotionField) -> float:
    """
    Среднее по k = 2..m значение MSE между W_k⁻¹(кадр k) и кадром 1.

    :raises ParameterError: Если число кадров не совпадает с field.m
    """
    if frames.shape[0] != field.m:
        raise ParameterError(f"Кадров {frames.shape[0]}, а поле движения задано для {field.m}")
    if field.m < 2:
        return 0.0
    errors = []
    for k, shift in enumerate(translation_flow(field)[1:], start=1):
        restored = warp_array(frames[k], inverse_shift(shift, field.mode), field.mode)
        errors.append(float(np.mean((restored - frames[0]) ** 2)))
    return float(np.mean(errors))


def estimate_displacement(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Сдвиг b относительно a по максимуму циклической взаимной корреляции.

    :param a: Кадр (height, width, channels)
    :param b: Кадр той же формы
    :return: Вектор (строки, столбцы) со знаком, в диапазоне (-size/2, size/2]
    """
    first = a.mean(axis=-1)
    second = b.mean(axis=-1)
    first = first - first.mean()
    second = second - second.mean()
    correlation = fft.ifft2(np.conj(fft.fft2(first)) * fft.fft2(second)).real
    peak = np.unravel_index(int(np.argmax(correlation)), correlation.shape)
    displacement = []
    for index, size in zip(peak, correlation.shape):
        displacement.append(index - size if index > size // 2 else index)
    return np.array(displacement, dtype=np.float64)


def mean_displacement(frames: np.ndarray) -> float:
    """Средняя норма сдвига между соседними кадрами; 0 для одного кадра."""
    if frames.shape[0] < 2:
        return 0.0
    norms = [float(np.linalg.norm(estimate_displacement(frames[k], frames[k + 1])))
             for k in range(frames.shape[0] - 1)]
    return float(np.mean(norms))


def nearest_mode_distance(frames: np.ndarray, mixture: Optional[MixtureModel]) -> List[float]:
    """Для каждого кадра L2 расстояние до ближайшего среднего смеси; пустой список без смеси."""
    if mixture is None:
        return []
    if tuple(frames.shape[1:]) != mixture.mean_shape:
        raise ParameterError(f"Форма кадра {frames.shape[1:]} не совпадает с формой смеси {mixture.mean_shape}")
    means = mixture.means.reshape(len(mixture.components), -1)
    flat = frames.reshape(frames.shape[0], -1)
    distances = np.sqrt(((flat[:, None, :] - means[None, :, :]) ** 2).sum(axis=-1))
    return [float(d) for d in distances.min(axis=1)]


def consistency_metrics(frames: LatentSequence, field: MotionField,
                        mixture: Optional[MixtureModel] = None,
                        variant: str = "full", seed: Optional[int] = None,
                        config_hash: str = "") -> MetricsReport:
    """
    Считает метрики согласованности последовательности кадров.

    :param frames: Сгенерированные кадры
    :param field: Поле движения, которым они были построены
    :param mixture: Смесь для расстояния до ближайшей моды
    :param variant: Имя варианта (для таблицы абляции)
    :param seed: Сид генерации
    :param config_hash: Хеш конфигурации
    :return: Отчет с метриками
    """
    data = frames.data
    report = MetricsReport(
        inter_frame_mse=inter_frame_mse(data),
        warped_inconsistency=warped_inconsistency(data, field),
        mean_displacement=mean_displacement(data),
        nearest_mode_distance=nearest_mode_distance(data, mixture),
        variant=variant,
        seed=seed,
        config_hash=config_hash,
    )
    values = [report.inter_frame_mse, report.warped_inconsistency, report.mean_displacement]
    values.extend(report.nearest_mode_distance)
    if not all(math.isfinite(v) for v in values):
        logger.warning(f"Метрики варианта '{variant}' содержат не конечные значения")
    return report


def median_report(reports: Sequence[MetricsReport], variant: str, config_hash: str = "") -> MetricsReport:
    """
    Медиана метрик по сидам для одного варианта.

    :raises ParameterError: Если список отчетов пуст
    """
    if not reports:
        raise ParameterError(f"Нет отчетов для варианта '{variant}'")
    return MetricsReport(
        inter_frame_mse=float(np.median([r.inter_frame_mse for r in reports])),
        warped_inconsistency=float(np.median([r.warped_inconsistency for r in reports])),
        mean_displacement=float(np.median([r.mean_displacement for r in reports])),
        nearest_mode_distance=[],
        variant=variant,
        seed=None,
        config_hash=config_hash,
    )
