"""
Типы данных для генерации видео диффузией.
Содержит общие классы данных используемые во всех core модулях.
"""

from dataclasses import dataclass, field, asdict
from typing import List, Optional, Tuple, FrozenSet, Dict, Any

import numpy as np

from .errors import ParameterError, ConditioningError

# Режимы внимания в денойзере
ATTN_SELF = "per_frame_self"
ATTN_CROSS = "cross_frame_first"
ATTENTION_MODES = (ATTN_SELF, ATTN_CROSS)

# Режимы варпинга латентов
WARP_WRAP = "wrap_integer"
WARP_BILINEAR = "clamp_bilinear"
WARP_MODES = (WARP_WRAP, WARP_BILINEAR)

Shift = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """
    Расписание шума: β_t и накопленные произведения ᾱ_t = ∏(1 - β_i).
    Индексы шагов 1-базные, t = 0 соответствует чистым данным (ᾱ_0 = 1).
    """
    betas: np.ndarray
    alpha_bars: np.ndarray
    kind: str = "custom"

    @property
    def length(self) -> int:
        return int(self.betas.shape[0])

    def alpha_bar(self, t: int) -> float:
        """
        Возвращает ᾱ_t с соглашением ᾱ_0 = 1.

        :param t: Шаг диффузии в диапазоне 0..N
        :return: Значение ᾱ_t
        :raises ParameterError: Если t вне диапазона
        """
        if t == 0:
            return 1.0
        if not 1 <= t <= self.length:
            raise ParameterError(f"Шаг t={t} вне диапазона 0..{self.length}")
        return float(self.alpha_bars[t - 1])

    def beta(self, t: int) -> float:
        if not 1 <= t <= self.length:
            raise ParameterError(f"Шаг t={t} вне диапазона 1..{self.length}")
        return float(self.betas[t - 1])


@dataclass(frozen=True, eq=False)
class Latent:
    """Латентный тензор одного кадра формы (height, width, channels) на шаге t."""
    data: np.ndarray
    t: int = 0

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)


@dataclass(frozen=True, eq=False)
class LatentSequence:
    """Последовательность латентов x^{1:m}_t формы (m, height, width, channels) с общим шагом t."""
    data: np.ndarray
    t: int = 0

    @property
    def frames(self) -> np.ndarray:
        return self.data

    @property
    def num_frames(self) -> int:
        return int(self.data.shape[0])

    def frame(self, k: int) -> Latent:
        """Возвращает кадр с индексом k (0-базный) как отдельный Latent."""
        return Latent(data=self.data[k], t=self.t)


@dataclass(frozen=True)
class TimeWindow:
    """Окно построения латентов с движением: стартовый шаг T и промежуточный T′ = T - Δt."""
    T: int
    T_prime: int

    @property
    def delta_t(self) -> int:
        return self.T - self.T_prime

    def validate(self, schedule_length: int) -> None:
        """
        Проверяет 1 ≤ T′ ≤ T ≤ N.

        :raises ParameterError: Если окно не помещается в расписание
        """
        if not 1 <= self.T_prime <= self.T <= schedule_length:
            raise ParameterError(
                f"Окно T={self.T}, T′={self.T_prime} не удовлетворяет 1 ≤ T′ ≤ T ≤ {schedule_length}"
            )


@dataclass(frozen=True)
class MotionField:
    """
    Глобальное поступательное движение: δ^k = λ·(k-1)·δ для k = 1..m.
    Компоненты векторов идут в порядке осей массива (строки, столбцы).
    """
    lam: float = 1.0
    delta: Shift = (1.0, 1.0)
    m: int = 8
    mode: str = WARP_WRAP

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError(f"Число кадров должно быть ≥ 1, получено {self.m}")
        if self.lam < 0:
            raise ParameterError(f"λ должна быть неотрицательной, получено {self.lam}")
        if self.mode not in WARP_MODES:
            raise ParameterError(f"Неизвестный режим варпинга: {self.mode}. Доступные: {WARP_MODES}")


@dataclass(frozen=True)
class Conditioning:
    """Условие генерации: целочисленная метка вместо текстового промпта, None - безусловная генерация."""
    label: Optional[int] = None

    def validate(self, vocab: int) -> None:
        if self.label is not None and not 0 <= self.label < vocab:
            raise ConditioningError(f"Метка {self.label} вне словаря размера {vocab}")


@dataclass(frozen=True, eq=False)
class MixtureComponent:
    """Компонента смеси: вес, среднее и изотропное стандартное отклонение (0 - точечная масса)."""
    weight: float
    mean: np.ndarray
    sigma: float = 0.0


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Смесь компонент, заменяющая распределение изображений, для которой оптимальный ε известен точно."""
    components: Tuple[MixtureComponent, ...]

    def __post_init__(self):
        if not self.components:
            raise ParameterError("Смесь должна содержать хотя бы одну компоненту")

        weights = np.array([c.weight for c in self.components], dtype=np.float64)
        if np.any(weights <= 0):
            raise ParameterError(f"Веса компонент должны быть положительными: {weights.tolist()}")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ParameterError(f"Сумма весов должна быть 1, получено {weights.sum()!r}")

        shapes = {c.mean.shape for c in self.components}
        if len(shapes) != 1:
            raise ParameterError(f"Средние компонент имеют разные формы: {shapes}")
        means = self.means
        if not np.all(np.isfinite(means)):
            raise ParameterError("Средние компонент содержат не конечные значения")
        for i in range(len(means)):
            for j in range(i + 1, len(means)):
                if np.array_equal(means[i], means[j]):
                    raise ParameterError(f"Средние компонент {i} и {j} совпадают")
        if any(c.sigma < 0 for c in self.components):
            raise ParameterError("Стандартное отклонение компоненты не может быть отрицательным")

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components], dtype=np.float64)

    @property
    def means(self) -> np.ndarray:
        return np.stack([np.asarray(c.mean, dtype=np.float64) for c in self.components])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([c.sigma for c in self.components], dtype=np.float64)

    @property
    def mean_shape(self) -> Tuple[int, ...]:
        return tuple(self.components[0].mean.shape)


@dataclass(frozen=True, eq=False)
class AttentionTensors:
    """Q, K, V всех кадров, каждый формы (m, tokens, c); токены идут построчно (row-major)."""
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if not (self.Q.ndim == self.K.ndim == self.V.ndim == 3):
            raise ParameterError("Q, K, V должны иметь форму (frames, tokens, channels)")
        if not (self.Q.shape[0] == self.K.shape[0] == self.V.shape[0]) or self.K.shape[1] != self.V.shape[1]:
            raise ParameterError(f"Несогласованные формы Q{self.Q.shape}, K{self.K.shape}, V{self.V.shape}")
        if self.Q.shape[2] != self.K.shape[2] or self.Q.shape[2] < 1:
            raise ParameterError(f"Размерность каналов Q и K не совпадает: {self.Q.shape[2]} vs {self.K.shape[2]}")

    @property
    def frames(self) -> int:
        return int(self.Q.shape[0])


@dataclass(frozen=True, eq=False)
class ForegroundMask:
    """Бинарная маска переднего плана M^k формы (height, width): 1 - объект, 0 - фон."""
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ParameterError(f"Маска должна быть двумерной, получена форма {self.data.shape}")
        if not np.all((self.data == 0) | (self.data == 1)):
            raise ParameterError("Маска должна содержать только 0 и 1")


@dataclass(frozen=True)
class SmoothingParams:
    """Параметры сглаживания фона: вес α и шаги, на которых оно применяется."""
    alpha: float = 0.6
    apply_at: FrozenSet[int] = frozenset()
    every_step: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"α должна лежать в [0, 1], получено {self.alpha}")

    def applies(self, t: int) -> bool:
        return t > 0 and (self.every_step or t in self.apply_at)


@dataclass
class TraceRecord:
    """Диагностика одного шага семплирования для одного кадра."""
    step: int
    t: int
    t_prev: int
    frame: int
    latent_norm: float
    eps_norm: float
    smoothed: bool = False


@dataclass
class GenerationResult:
    """Результат генерации: чистые кадры, стартовые латенты x^{1:m}_T и трасса шагов."""
    frames: LatentSequence
    initial: LatentSequence
    trace: List[TraceRecord] = field(default_factory=list)
    config_hash: str = ""


@dataclass
class MetricsReport:
    """Метрики временной согласованности одного варианта генерации."""
    inter_frame_mse: float
    warped_inconsistency: float
    mean_displacement: float
    nearest_mode_distance: List[float] = field(default_factory=list)
    variant: str = "full"
    seed: Optional[int] = None
    config_hash: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AblationTable:
    """Таблица абляции: по одной строке метрик на вариант (медиана по сидам)."""
    study: str
    rows: List[MetricsReport]
    seeds: List[int]
    config_hash: str = ""

    def row(self, variant: str) -> MetricsReport:
        for report in self.rows:
            if report.variant == variant:
                return report
        raise KeyError(f"Вариант не найден: {variant}")
