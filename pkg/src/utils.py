import os
import json
import logging
from typing import Any, Dict, List

import numpy as np


def spawn_streams(seed: int, count: int = 3) -> List[np.random.Generator]:
    """
    Независимые генераторы из одного сида.

    Для генерации используются три потока: [0] - стартовый латент первого кадра,
    [1] - шум прямого процесса при построении латентов с движением, [2] - независимые латенты кадров 2..m.

    :param seed: Сид запуска
    :param count: Число потоков
    :return: Список генераторов
    """
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


def write_json(path: str, data: Dict[str, Any]) -> str:
    """
    Записывает словарь в JSON с отсортированными ключами (детерминированный вывод).

    :param path: Путь к файлу
    :param data: Данные
    :return: Путь к записанному файлу
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    logging.debug(f"JSON записан: {path}")
    return path


def format_shift(shift) -> str:
    return f"({shift[0]:+.2f}, {shift[1]:+.2f})"
