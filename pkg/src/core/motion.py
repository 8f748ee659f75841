"""
Глобальное движение в латентах: векторы переноса, варпинг латентов
и построение обогащенных движением стартовых латентов (окно T -> T′ -> T).
"""

import math
import logging
from dataclasses import replace
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from .diffusion import ddim_backward, ddpm_forward, make_step_grid
from .errors import ParameterError
from .types import (
    ATTN_SELF, WARP_BILINEAR, WARP_WRAP, Conditioning, Latent, LatentSequence,
    MotionField, NoiseSchedule, Shift, TimeWindow,
)

logger = logging.getLogger(__name__)


def translation_flow(field: MotionField) -> List[Tuple[float, float]]:
    """
    Векторы глобального переноса δ^k = λ·(k-1)·δ для k = 1..m.

    :param field: Поле движения
    :return: Список из m векторов, первый всегда (0, 0)
    """
    dx, dy = field.delta
    return [(field.lam * k * dx, field.lam * k * dy) for k in range(field.m)]


def inverse_shift(shift: Shift, mode: str = WARP_WRAP) -> Tuple[float, float]:
    """
    Обратный вектор переноса. В режиме wrap сдвиг сначала округляется,
    чтобы обратный перенос точно отменял прямой.
    """
    if mode == WARP_WRAP:
        return (-float(math.floor(shift[0] + 0.5)), -float(math.floor(shift[1] + 0.5)))
    return (-shift[0], -shift[1])


def warp_array(data: np.ndarray, shift: Shift, mode: str = WARP_WRAP) -> np.ndarray:
    """
    Переносит массив (height, width, ...) на вектор shift.

    Положительный сдвиг двигает содержимое в сторону больших индексов строк/столбцов.
    wrap_integer округляет сдвиг и переставляет элементы на торе;
    clamp_bilinear интерполирует билинейно с повторением краевых значений.

    :param data: Массив, первые две оси - пространственные
    :param shift: Вектор сдвига (по строкам, по столбцам)
    :param mode: Режим варпинга
    :return: Новый массив той же формы
    """
    if mode == WARP_WRAP:
        rows, cols = (int(math.floor(s + 0.5)) for s in shift)
        if rows == 0 and cols == 0:
            return data.copy()
        # np.roll сам приводит сдвиг по модулю размера сетки
        return np.roll(data, (rows, cols), axis=(0, 1))

    if mode == WARP_BILINEAR:
        if shift[0] == 0 and shift[1] == 0:
            return data.copy()
        full_shift = (float(shift[0]), float(shift[1])) + (0.0,) * (data.ndim - 2)
        return ndimage.shift(data, full_shift, order=1, mode="nearest", prefilter=False)

    raise ParameterError(f"Неизвестный режим варпинга: {mode}")


def warp_translate(x: Latent, shift: Shift, mode: str = WARP_WRAP) -> Latent:
    """
    Оператор W_k: перенос латента на вектор shift.

    :param x: Латент
    :param shift: Вектор сдвига
    :param mode: 'wrap_integer' или 'clamp_bilinear'
    :return: Перенесенный латент на том же шаге
    """
    return replace(x, data=warp_array(x.data, shift, mode))


def motion_latents(x1_T: Latent, window: TimeWindow, field: MotionField, denoiser,
                   schedule: NoiseSchedule, cond: Optional[Conditioning],
                   rng: np.random.Generator, window_stride: int = 20,
                   attn_mode: str = ATTN_SELF) -> LatentSequence:
    """
    Строит латенты x^{1:m}_T с глобальным движением.

    1. Δt шагов DDIM назад: x^1_T -> x^1_{T′}.
    2. Для k = 2..m перенос x^1_{T′} на δ^k.
    3. Прыжок DDPM вперед на Δt для каждого перенесенного латента -> x^k_T.
    Первый кадр результата - исходный x^1_T без изменений.

    :param x1_T: Стартовый латент первого кадра на шаге T
    :param window: Окно (T, T′)
    :param field: Поле движения
    :param denoiser: Денойзер для обратных шагов
    :param schedule: Расписание шума
    :param cond: Условие генерации
    :param rng: Генератор; для каждого кадра порождается свой подпоток
    :param window_stride: Шаг сетки DDIM внутри окна (число шагов = ceil(Δt / stride))
    :param attn_mode: Режим внимания при обратных шагах
    :return: Последовательность из m латентов на шаге T
    :raises ParameterError: Если латент не на шаге T или окно не помещается в расписание
    """
    window.validate(schedule.length)
    if x1_T.t != window.T:
        raise ParameterError(f"Латент первого кадра на шаге {x1_T.t}, ожидался T={window.T}")
    if window_stride < 1:
        raise ParameterError(f"Шаг сетки окна должен быть ≥ 1, получено {window_stride}")

    delta_t = window.delta_t
    if field.m == 1:
        return LatentSequence(data=x1_T.data[None].copy(), t=window.T)

    if delta_t > 0:
        backward_steps = math.ceil(delta_t / window_stride)
        grid = make_step_grid(window.T, backward_steps, t_end=window.T_prime)
        x1_mid = ddim_backward(x1_T, denoiser, schedule, grid, cond, attn_mode)
    else:
        x1_mid = x1_T

    frames = [x1_T.data]
    # Подпотоки по номеру кадра: результат не зависит от порядка обработки кадров
    frame_rngs = rng.spawn(field.m - 1)
    for k, shift in enumerate(translation_flow(field)[1:]):
        warped = warp_translate(x1_mid, shift, field.mode)
        renoised = ddpm_forward(warped, window.T, schedule, frame_rngs[k])
        frames.append(renoised.data)

    logger.debug(f"Латенты движения: m={field.m}, Δt={delta_t}, режим={field.mode}")
    return LatentSequence(data=np.stack(frames), t=window.T)
