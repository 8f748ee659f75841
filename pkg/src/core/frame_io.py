"""
Запись и чтение кадров: PGM (P5) и PNG в оттенках серого.
"""

import os
import re
import logging
from typing import Any, List

import numpy as np
from PIL import Image

from .errors import ParameterError
from .types import LatentSequence

logger = logging.getLogger(__name__)

FRAME_FORMATS = {"pgm": "PPM", "png": "PNG"}
FRAME_PATTERN = re.compile(r"^frame_\d+\.(pgm|png)$", re.IGNORECASE)


def quantize_frame(frame: np.ndarray) -> np.ndarray:
    """
    Переводит кадр (height, width, channels) в 8-битное изображение.

    Каналы усредняются, значения нормируются min-max в 0..255.
    Кадр с нулевым размахом становится серым 128.

    :param frame: Латент одного кадра
    :return: Массив uint8 формы (height, width)
    """
    gray = frame.mean(axis=-1) if frame.ndim == 3 else frame
    low, high = float(gray.min()), float(gray.max())
    if high - low <= 0.0 or not np.isfinite(high - low):
        return np.full(gray.shape, 128, dtype=np.uint8)
    scaled = (gray - low) / (high - low) * 255.0
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def write_frames(frames: LatentSequence, directory: str, fmt: str = "pgm") -> List[str]:
    """
    Записывает кадры как frame_000.<fmt> ... frame_{m-1}.<fmt>.

    :param frames: Последовательность латентов
    :param directory: Выходная директория (создается при необходимости)
    :param fmt: 'pgm' (бинарный P5, maxval 255) или 'png'
    :return: Список путей записанных файлов
    :raises ParameterError: Если формат неизвестен
    :raises OSError: Если запись не удалась (путь в сообщении)
    """
    if fmt not in FRAME_FORMATS:
        raise ParameterError(f"Неизвестный формат кадров: {fmt}. Доступные: {list(FRAME_FORMATS)}")

    os.makedirs(directory, exist_ok=True)
    paths = []
    for k in range(frames.num_frames):
        path = os.path.join(directory, f"frame_{k:03d}.{fmt}")
        image = Image.fromarray(quantize_frame(frames.data[k]), mode="L")
        try:
            image.save(path, format=FRAME_FORMATS[fmt])
        except OSError as e:
            raise OSError(f"Не удалось записать кадр {path}: {e}") from e
        paths.append(path)

    logger.info(f"Записано кадров: {len(paths)} в {directory}")
    return paths


def _natural_sort_key(text: str) -> List[Any]:
    return [int(part) if part.isdigit() else part.lower() for part in re.split(r"(\d+)", text)]


def list_frame_files(directory: str) -> List[str]:
    """Файлы frame_*.pgm|png директории в естественном порядке (frame_2 раньше frame_10)."""
    if not os.path.isdir(directory):
        raise ParameterError(f"Директория с кадрами не найдена: {directory}")
    names = [name for name in os.listdir(directory) if FRAME_PATTERN.match(name)]
    return [os.path.join(directory, name) for name in sorted(names, key=_natural_sort_key)]


def read_frames(directory: str) -> LatentSequence:
    """
    Читает кадры директории как последовательность с одним каналом (значения 0..255).

    :param directory: Директория с frame_*.pgm или frame_*.png
    :return: LatentSequence формы (m, height, width, 1) на шаге 0
    :raises ParameterError: Если кадров нет или их размеры различаются
    """
    paths = list_frame_files(directory)
    if not paths:
        raise ParameterError(f"В директории {directory} нет файлов frame_*.pgm или frame_*.png")

    frames = []
    for path in paths:
        try:
            with Image.open(path) as img:
                frames.append(np.asarray(img.convert("L"), dtype=np.float64))
        except OSError as e:
            raise ParameterError(f"Не удалось прочитать кадр {path}: {e}") from e

    shapes = {frame.shape for frame in frames}
    if len(shapes) != 1:
        raise ParameterError(f"Кадры имеют разные размеры: {sorted(shapes)}")

    logger.debug(f"Прочитано кадров: {len(frames)} из {directory}")
    return LatentSequence(data=np.stack(frames)[..., None], t=0)
