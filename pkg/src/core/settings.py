"""
Конфигурация генерации: плоский JSON с ключами, повторяющими флаги CLI.
Порядок загрузки: значения по умолчанию <- файл конфигурации <- флаги командной строки.
"""

import os
import json
import hashlib
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional

from .denoisers import mixture_from_config
from .diffusion import SCHEDULE_KINDS, build_schedule
from .errors import ConfigError, ParameterError
from .types import (
    ATTN_CROSS, ATTN_SELF, WARP_MODES, Conditioning, MotionField, NoiseSchedule,
    SmoothingParams, TimeWindow,
)

logger = logging.getLogger(__name__)

ATTN_CHOICES = {"self": ATTN_SELF, "cross": ATTN_CROSS}
DENOISER_CHOICES = ("toy", "mixture")
MASK_CHOICES = ("disk", "threshold")
FORMAT_CHOICES = ("pgm", "png")

# Ключи, которые не влияют на численный результат и не входят в хеш
OUTPUT_ONLY_KEYS = ("out", "format", "max_workers")

# JSON ключ -> имя поля, где ключ совпадает со словом Python
KEY_ALIASES = {"lambda": "lam"}


@dataclass
class GenerationConfig:
    """Полная конфигурация генерации видео."""
    seed: int = 0
    frames: int = 8
    height: int = 16
    width: int = 16
    channels: int = 2

    num_train_steps: int = 1000
    beta_start: float = 0.00085
    beta_end: float = 0.012
    schedule_kind: str = "scaled_linear"

    t_start: int = 941
    t_mid: int = 881
    dt: int = 60
    steps: int = 50
    window_stride: int = 20

    lam: float = 1.0
    delta_x: float = 1.0
    delta_y: float = 1.0
    warp_mode: str = "wrap_integer"
    attn: str = "cross"

    smoothing: bool = False
    smooth_alpha: float = 0.6
    smooth_every_step: bool = False
    mask_kind: str = "disk"
    mask_radius: float = 4.0
    mask_threshold: float = 1.0
    mask_dir: str = ""

    denoiser: str = "toy"
    denoiser_seed: int = 0
    label: Optional[int] = 0
    vocab: int = 4
    hidden_channels: int = 8
    attn_sharpness: float = 3.0
    mixture: Optional[Dict[str, Any]] = None

    num_seeds: int = 20
    dt_sweep: List[int] = field(default_factory=lambda: [0, 20, 40, 60, 80])
    max_workers: int = 4
    format: str = "pgm"
    out: str = "output"

    def to_dict(self) -> Dict[str, Any]:
        """Словарь с ключами JSON (lam -> lambda)."""
        reverse = {name: key for key, name in KEY_ALIASES.items()}
        return {reverse.get(name, name): value for name, value in asdict(self).items()}

    @property
    def latent_shape(self):
        return (self.height, self.width, self.channels)

    def build_schedule(self) -> NoiseSchedule:
        return build_schedule(self.num_train_steps, self.beta_start, self.beta_end, self.schedule_kind)

    def time_window(self) -> TimeWindow:
        return TimeWindow(T=self.t_start, T_prime=self.t_mid)

    def motion_field(self) -> MotionField:
        return MotionField(lam=self.lam, delta=(self.delta_x, self.delta_y), m=self.frames, mode=self.warp_mode)

    def attn_mode(self) -> str:
        return ATTN_CHOICES[self.attn]

    def conditioning(self) -> Conditioning:
        return Conditioning(label=self.label)

    def smoothing_params(self, apply_at=frozenset()) -> SmoothingParams:
        return SmoothingParams(alpha=self.smooth_alpha, apply_at=frozenset(apply_at),
                               every_step=self.smooth_every_step)


def _field_names() -> List[str]:
    return [f.name for f in fields(GenerationConfig)]


def config_from_dict(data: Dict[str, Any]) -> GenerationConfig:
    """
    Строит конфигурацию из словаря с ключами JSON.

    :raises ConfigError: Если встречен неизвестный ключ
    """
    known = set(_field_names())
    values = {}
    for key, value in data.items():
        name = KEY_ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"Неизвестный ключ конфигурации: '{key}'")
        values[name] = value
    return GenerationConfig(**values)


def load_generation_config(config_path: Optional[str]) -> GenerationConfig:
    """
    Загружает конфигурацию из JSON файла.

    :param config_path: Путь к файлу или None для значений по умолчанию
    :return: Конфигурация (еще не проверенная)
    :raises ConfigError: Если файл не найден, содержит невалидный JSON или неизвестные ключи
    """
    if not config_path:
        return GenerationConfig()
    if not os.path.exists(config_path):
        raise ConfigError(f"Файл конфигурации не найден: {config_path}")
    try:
        with open(config_path, 'r', encoding='utf-8') as file:
            data = json.load(file)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Ошибка в формате конфигурации {config_path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Конфигурация должна быть JSON объектом: {config_path}")

    logger.info(f"Конфигурация загружена из {config_path}")
    return config_from_dict(data)


def apply_overrides(config: GenerationConfig, overrides: Dict[str, Any]) -> GenerationConfig:
    """
    Применяет значения из CLI поверх конфигурации; None означает "не задано".

    Окно согласуется так: --dt без --t-mid выводит t_mid = t_start - dt,
    --t-mid без --dt выводит dt; --smooth-alpha включает сглаживание.

    :param config: Исходная конфигурация
    :param overrides: Словарь ключ JSON -> значение
    :return: Новая конфигурация
    :raises ConfigError: Если ключ неизвестен
    """
    given = {}
    known = set(_field_names())
    for key, value in overrides.items():
        if value is None:
            continue
        name = KEY_ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"Неизвестный параметр: '{key}'")
        given[name] = value

    updated = replace(config, **given)

    if "dt" in given and "t_mid" not in given:
        updated = replace(updated, t_mid=updated.t_start - updated.dt)
    elif "t_mid" in given and "dt" not in given:
        updated = replace(updated, dt=updated.t_start - updated.t_mid)
    elif "t_start" in given and "t_mid" not in given:
        updated = replace(updated, t_mid=updated.t_start - updated.dt)

    if "smooth_alpha" in given:
        updated = replace(updated, smoothing=True)
    return updated


def validate_config(config: GenerationConfig) -> GenerationConfig:
    """
    Проверяет внутреннюю согласованность конфигурации.

    :return: Та же конфигурация
    :raises ConfigError: При первом найденном нарушении
    """
    def check(condition: bool, message: str) -> None:
        if not condition:
            raise ConfigError(message)

    for item in fields(GenerationConfig):
        value = getattr(config, item.name)
        if item.type in (int, float) and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"Параметр '{item.name}' должен быть числом, получено {value!r}")
        if item.type is str and not isinstance(value, str):
            raise ConfigError(f"Параметр '{item.name}' должен быть строкой, получено {value!r}")

    check(config.frames >= 1, f"frames должно быть ≥ 1, получено {config.frames}")
    check(min(config.height, config.width, config.channels) >= 1,
          f"Некорректная форма латента: {config.latent_shape}")
    check(config.num_train_steps >= 1, f"num_train_steps должно быть ≥ 1, получено {config.num_train_steps}")
    check(config.schedule_kind in SCHEDULE_KINDS,
          f"Неизвестный schedule_kind: {config.schedule_kind}. Доступные: {SCHEDULE_KINDS}")
    check(1 <= config.t_mid <= config.t_start <= config.num_train_steps,
          f"Окно t_start={config.t_start}, t_mid={config.t_mid} не удовлетворяет "
          f"1 ≤ t_mid ≤ t_start ≤ {config.num_train_steps}")
    check(config.t_start - config.t_mid == config.dt,
          f"Несогласованное окно: t_start - t_mid = {config.t_start - config.t_mid}, а dt = {config.dt}")
    check(config.steps >= 1, f"steps должно быть ≥ 1, получено {config.steps}")
    check(config.window_stride >= 1, f"window_stride должно быть ≥ 1, получено {config.window_stride}")
    check(config.lam >= 0, f"lambda должна быть неотрицательной, получено {config.lam}")
    check(config.warp_mode in WARP_MODES, f"Неизвестный warp_mode: {config.warp_mode}. Доступные: {WARP_MODES}")
    check(config.attn in ATTN_CHOICES, f"Неизвестный attn: {config.attn}. Доступные: {list(ATTN_CHOICES)}")
    check(0.0 <= config.smooth_alpha <= 1.0, f"smooth_alpha должна лежать в [0, 1], получено {config.smooth_alpha}")
    check(config.mask_kind in MASK_CHOICES, f"Неизвестный mask_kind: {config.mask_kind}")
    check(config.mask_radius >= 0, f"mask_radius не может быть отрицательным: {config.mask_radius}")
    check(config.denoiser in DENOISER_CHOICES, f"Неизвестный denoiser: {config.denoiser}")
    check(config.vocab >= 1, f"vocab должно быть ≥ 1, получено {config.vocab}")
    check(config.label is None or 0 <= config.label < config.vocab,
          f"Метка {config.label} вне словаря размера {config.vocab}")
    check(config.hidden_channels >= 1, f"hidden_channels должно быть ≥ 1, получено {config.hidden_channels}")
    check(config.num_seeds >= 1, f"num_seeds должно быть ≥ 1, получено {config.num_seeds}")
    check(all(0 <= dt < config.t_start for dt in config.dt_sweep),
          f"Значения dt_sweep должны лежать в [0, t_start): {config.dt_sweep}")
    check(config.max_workers >= 1, f"max_workers должно быть ≥ 1, получено {config.max_workers}")
    check(config.format in FORMAT_CHOICES, f"Неизвестный формат: {config.format}")

    if config.mixture is not None:
        try:
            mixture_from_config(config.mixture, config.latent_shape)
        except (ParameterError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Некорректное описание смеси: {e}") from e
    return config


def config_hash(config: GenerationConfig) -> str:
    """SHA-256 канонического JSON конфигурации без выходных ключей, первые 16 hex символов."""
    payload = {key: value for key, value in config.to_dict().items() if key not in OUTPUT_ONLY_KEYS}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
