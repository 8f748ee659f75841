"""
Маски переднего плана и сглаживание фона: выпуклая комбинация латента кадра
с перенесенным латентом первого кадра на пикселях фона.
"""

import os
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from .errors import ParameterError
from .motion import translation_flow, warp_translate
from .types import WARP_WRAP, ForegroundMask, Latent, LatentSequence, MotionField, Shift, SmoothingParams

logger = logging.getLogger(__name__)

MASK_KINDS = ("disk", "threshold")


def _disk_mask(shape: Tuple[int, int], center: Tuple[float, float], radius: float,
               wrap: bool) -> np.ndarray:
    height, width = shape
    if radius == 0:
        return np.zeros(shape, dtype=np.uint8)
    rows = np.arange(height, dtype=np.float64)[:, None] - center[0]
    cols = np.arange(width, dtype=np.float64)[None, :] - center[1]
    if wrap:
        # Расстояние на торе: ближайшая из периодических копий центра
        rows = rows - height * np.round(rows / height)
        cols = cols - width * np.round(cols / width)
    inside = rows ** 2 + cols ** 2 <= radius ** 2
    return inside.astype(np.uint8)


def synthetic_mask_provider(kind: str, shape: Tuple[int, int], field: MotionField,
                            center: Optional[Tuple[float, float]] = None,
                            radius: float = 4.0,
                            level: float = 1.0,
                            latents: Optional[LatentSequence] = None) -> List[ForegroundMask]:
    """
    Синтетические маски переднего плана вместо детектора заметных объектов.

    disk: круг радиуса radius вокруг центра, сдвинутого на δ^k для кадра k
    (включительно, d² ≤ r²; в режиме wrap расстояние меряется на торе).
    threshold: пиксели, где среднее |x| по каналам больше level.

    :param kind: 'disk' или 'threshold'
    :param shape: Пространственная форма (height, width)
    :param field: Поле движения (число кадров и векторы δ^k)
    :param center: Центр круга для первого кадра; по умолчанию центр сетки
    :param radius: Радиус круга; 0 дает пустые маски
    :param level: Порог для threshold
    :param latents: Латенты, по которым строятся threshold маски
    :return: Список из m масок
    :raises ParameterError: Если тип неизвестен, радиус отрицателен или нет латентов для threshold
    """
    if kind not in MASK_KINDS:
        raise ParameterError(f"Неизвестный тип маски: {kind}. Доступные: {MASK_KINDS}")

    if kind == "disk":
        if radius < 0:
            raise ParameterError(f"Радиус маски не может быть отрицательным: {radius}")
        if center is None:
            center = (shape[0] / 2.0, shape[1] / 2.0)
        wrap = field.mode == WARP_WRAP
        masks = []
        for shift in translation_flow(field):
            moved = (center[0] + shift[0], center[1] + shift[1])
            masks.append(ForegroundMask(data=_disk_mask(shape, moved, radius, wrap)))
        return masks

    if latents is None:
        raise ParameterError("Для маски threshold нужны латенты")
    if tuple(latents.data.shape[1:3]) != tuple(shape):
        raise ParameterError(f"Форма латентов {latents.data.shape[1:3]} не совпадает с формой маски {shape}")
    if latents.num_frames != field.m:
        raise ParameterError(f"Латентов {latents.num_frames}, а кадров {field.m}")
    magnitude = np.abs(latents.data).mean(axis=-1)
    return [ForegroundMask(data=(frame > level).astype(np.uint8)) for frame in magnitude]


def load_masks(directory: str, shape: Tuple[int, int], count: int) -> List[ForegroundMask]:
    """
    Загружает маски mask_000.pgm ... из директории (P5, 0 - фон, 255 - объект).

    :param directory: Директория с масками
    :param shape: Ожидаемая форма (height, width)
    :param count: Сколько масок нужно
    :return: Список масок
    :raises ParameterError: Если файл отсутствует, не того размера или содержит другие значения
    """
    masks = []
    for k in range(count):
        path = os.path.join(directory, f"mask_{k:03d}.pgm")
        if not os.path.exists(path):
            raise ParameterError(f"Файл маски не найден: {path}")
        try:
            with Image.open(path) as img:
                data = np.asarray(img.convert("L"), dtype=np.uint8)
        except OSError as e:
            raise ParameterError(f"Не удалось прочитать маску {path}: {e}") from e

        if data.shape != tuple(shape):
            raise ParameterError(f"Маска {path} имеет размер {data.shape}, ожидался {tuple(shape)}")
        if not np.all((data == 0) | (data == 255)):
            raise ParameterError(f"Маска {path} должна содержать только 0 и 255")
        masks.append(ForegroundMask(data=(data == 255).astype(np.uint8)))

    logger.debug(f"Загружено масок: {len(masks)} из {directory}")
    return masks


def background_smooth(x_k: Latent, x_1: Latent, mask: ForegroundMask, shift: Shift,
                      alpha: float = 0.6, mode: str = WARP_WRAP) -> Latent:
    """
    x̄^k = M ⊙ x^k + (1 - M) ⊙ (α·W_k(x^1) + (1 - α)·x^k).

    Пиксели переднего плана проходят без изменений, фон смешивается с перенесенным
    первым кадром. Результат смеси зажимается между двумя источниками.

    :param x_k: Латент кадра k на шаге t
    :param x_1: Латент первого кадра на том же шаге
    :param mask: Маска переднего плана кадра k
    :param shift: Вектор δ^k
    :param alpha: Вес первого кадра, 0 ≤ α ≤ 1
    :param mode: Режим варпинга
    :return: Сглаженный латент
    :raises ParameterError: Если формы не совпадают или α вне [0, 1]
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"α должна лежать в [0, 1], получено {alpha}")
    if x_k.data.shape != x_1.data.shape:
        raise ParameterError(f"Формы кадров не совпадают: {x_k.data.shape} и {x_1.data.shape}")
    if mask.data.shape != x_k.data.shape[:2]:
        raise ParameterError(f"Форма маски {mask.data.shape} не совпадает с {x_k.data.shape[:2]}")

    x_hat = warp_translate(x_1, shift, mode).data
    if alpha == 0.0:
        blend = x_k.data
    elif alpha == 1.0:
        blend = x_hat
    else:
        blend = alpha * x_hat + (1.0 - alpha) * x_k.data
        blend = np.clip(blend, np.minimum(x_hat, x_k.data), np.maximum(x_hat, x_k.data))

    foreground = mask.data.astype(bool)[..., None]
    return Latent(data=np.where(foreground, x_k.data, blend), t=x_k.t)


def smooth_sequence(latents: LatentSequence, masks: Sequence[ForegroundMask], field: MotionField,
                    params: SmoothingParams) -> LatentSequence:
    """
    Применяет сглаживание фона ко всем кадрам последовательности относительно первого кадра.

    :raises ParameterError: Если масок меньше, чем кадров
    """
    if len(masks) != latents.num_frames:
        raise ParameterError(f"Масок {len(masks)}, а кадров {latents.num_frames}")
    flow = translation_flow(field)
    first = latents.frame(0)
    smoothed = [background_smooth(latents.frame(k), first, masks[k], flow[k], params.alpha, field.mode).data
                for k in range(latents.num_frames)]
    return LatentSequence(data=np.stack(smoothed), t=latents.t)
