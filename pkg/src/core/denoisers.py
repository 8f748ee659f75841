"""
Денойзеры, предсказывающие шум ε̂.

Содержит интерфейс Denoiser и две реализации:
точный оракул для смеси компонент (оптимальный в смысле MMSE)
и игрушечный денойзер с одним блоком внимания, на котором проверяется
межкадровое внимание.
"""

import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import softmax

from .attention import channel_matmul, cross_frame_attention, per_frame_self_attention, project_qkv
from .errors import ConditioningError, DegenerateNoiseError, ParameterError
from .types import (
    ATTENTION_MODES, ATTN_CROSS, AttentionTensors, Conditioning, Latent, LatentSequence,
    MixtureComponent, MixtureModel, NoiseSchedule,
)

logger = logging.getLogger(__name__)


class Denoiser(ABC):
    """
    Интерфейс предсказателя шума ε_θ(x_t, t, τ).

    Выход имеет форму входа и детерминирован. В режиме per_frame_self выход кадра k
    зависит только от кадра k.
    """

    @abstractmethod
    def eval(self, latents: LatentSequence, t: int, cond: Optional[Conditioning],
             attn_mode: str) -> np.ndarray:
        """
        Предсказывает шум для всех кадров последовательности.

        :param latents: Латенты x^{1:m}_t формы (m, h, w, c)
        :param t: Шаг диффузии
        :param cond: Условие генерации (None - безусловно)
        :param attn_mode: 'per_frame_self' или 'cross_frame_first'
        :return: ε̂ формы (m, h, w, c)
        """


def _noise_level(t: int, schedule: NoiseSchedule) -> float:
    alpha_bar = schedule.alpha_bar(t)
    if 1.0 - alpha_bar <= 0.0:
        raise DegenerateNoiseError(f"На шаге t={t} нет шума (ᾱ_t = 1), ε не определен")
    return alpha_bar


def _posterior_mean_flat(flat: np.ndarray, alpha_bar: float, mixture: MixtureModel) -> np.ndarray:
    """
    Апостериорное среднE[x_0 | x_t] для батча векторов (B, D).

    x_t | j ~ N(sqrt(ᾱ)μ_j, (ᾱσ_j² + 1 - ᾱ)I); для σ_j = 0 условное среднее равно μ_j.
    """
    dim = flat.shape[1]
    means = mixture.means.reshape(len(mixture.components), -1)
    if means.shape[1] != dim:
        raise ParameterError(f"Размерность латента {dim} не совпадает с размерностью смеси {means.shape[1]}")

    sqrt_ab = math.sqrt(alpha_bar)
    sigma2 = mixture.sigmas ** 2
    variances = alpha_bar * sigma2 + (1.0 - alpha_bar)

    diff = flat[:, None, :] - sqrt_ab * means[None, :, :]
    sq_dist = (diff ** 2).sum(axis=-1)
    log_resp = np.log(mixture.weights) - 0.5 * dim * np.log(variances) - sq_dist / (2.0 * variances)
    responsibilities = softmax(log_resp, axis=1)

    gains = sqrt_ab * sigma2 / variances
    conditional_means = means[None, :, :] + gains[None, :, None] * diff
    return (responsibilities[:, :, None] * conditional_means).sum(axis=1)


def mixture_posterior_mean(x_t: Latent, t: int, mixture: MixtureModel,
                           schedule: NoiseSchedule) -> np.ndarray:
    """
    Точное апостериорное среднее x̂_0 = E[x_0 | x_t] для смеси.

    :param x_t: Зашумленный латент
    :param t: Шаг диффузии, 1 ≤ t ≤ N
    :param mixture: Модель данных
    :param schedule: Расписание шума
    :return: x̂_0 той же формы, что и x_t
    :raises DegenerateNoiseError: Если ᾱ_t = 1
    """
    alpha_bar = _noise_level(t, schedule)
    flat = x_t.data.reshape(1, -1)
    return _posterior_mean_flat(flat, alpha_bar, mixture).reshape(x_t.data.shape)


def mixture_posterior_eps(x_t: Latent, t: int, mixture: MixtureModel,
                          schedule: NoiseSchedule) -> np.ndarray:
    """
    MMSE-оптимальный шум ε̂ = (x_t - sqrt(ᾱ_t)·x̂_0) / sqrt(1 - ᾱ_t).

    Ответственности компонент считаются в лог-пространстве с вычитанием максимума.

    :raises DegenerateNoiseError: Если ᾱ_t = 1
    """
    alpha_bar = _noise_level(t, schedule)
    x0_hat = mixture_posterior_mean(x_t, t, mixture, schedule)
    return (x_t.data - math.sqrt(alpha_bar) * x0_hat) / math.sqrt(1.0 - alpha_bar)


class MixtureSequenceDenoiser(Denoiser):
    """
    Оракул смеси в интерфейсе последовательности: применяется к каждому кадру отдельно,
    режим внимания игнорируется, метка условия выбирает смесь.
    """

    def __init__(self, mixtures: Mapping[Optional[int], MixtureModel], schedule: NoiseSchedule):
        """
        :param mixtures: Смесь для каждой метки условия (ключ None - безусловная)
        :param schedule: Расписание шума
        """
        if not mixtures:
            raise ParameterError("Нужна хотя бы одна смесь")
        self.mixtures = dict(mixtures)
        self.schedule = schedule

    def mixture_for(self, cond: Optional[Conditioning]) -> MixtureModel:
        label = cond.label if cond is not None else None
        if label not in self.mixtures:
            raise ConditioningError(f"Нет смеси для метки {label}. Доступные: {sorted(self.mixtures, key=str)}")
        return self.mixtures[label]

    def eval(self, latents: LatentSequence, t: int, cond: Optional[Conditioning],
             attn_mode: str) -> np.ndarray:
        mixture = self.mixture_for(cond)
        alpha_bar = _noise_level(t, self.schedule)
        flat = latents.data.reshape(latents.num_frames, -1)
        x0_hat = _posterior_mean_flat(flat, alpha_bar, mixture).reshape(latents.data.shape)
        return (latents.data - math.sqrt(alpha_bar) * x0_hat) / math.sqrt(1.0 - alpha_bar)


def mixture_sequence_denoiser(mixtures: Union[MixtureModel, Mapping[Optional[int], MixtureModel]],
                              schedule: NoiseSchedule,
                              vocab: int = 1) -> MixtureSequenceDenoiser:
    """
    Оборачивает оракул смеси в интерфейс Denoiser.

    :param mixtures: Одна общая смесь или словарь метка -> смесь
    :param schedule: Расписание шума
    :param vocab: Размер словаря меток, если смесь общая
    :return: Денойзер последовательностей
    """
    if isinstance(mixtures, MixtureModel):
        shared = mixtures
        mixtures = {label: shared for label in list(range(vocab)) + [None]}
    return MixtureSequenceDenoiser(mixtures, schedule)


def default_mixtures(shape: Tuple[int, ...], vocab: int, seed: int) -> Dict[Optional[int], MixtureModel]:
    """
    Две противоположные точечные массы на каждую метку, средние берутся из сида и метки.

    :param shape: Форма латента одного кадра
    :param vocab: Число меток
    :param seed: Сид генерации средних
    :return: Словарь метка -> смесь; ключ None получает смесь метки 0
    """
    mixtures: Dict[Optional[int], MixtureModel] = {}
    for label in range(vocab):
        rng = np.random.default_rng([seed, label])
        mean = rng.standard_normal(shape)
        mixtures[label] = MixtureModel(components=(
            MixtureComponent(weight=0.5, mean=mean),
            MixtureComponent(weight=0.5, mean=-mean),
        ))
    mixtures[None] = mixtures[0]
    return mixtures


def mixture_from_config(mixtures_config: Mapping[str, Sequence[Mapping[str, Any]]],
                        shape: Tuple[int, ...]) -> Dict[Optional[int], MixtureModel]:
    """
    Загружает смеси из конфигурации.

    Формат: {"0": [{"weight": 0.5, "mean": 1.0 | вложенный список, "sigma": 0.0}, ...], "null": [...]}.
    Скалярное среднее заполняет всю сетку.

    :raises ParameterError: Если формат или формы некорректны
    """
    mixtures: Dict[Optional[int], MixtureModel] = {}
    for key, components in mixtures_config.items():
        label = None if key in ("null", "none", "") else int(key)
        built = []
        for component in components:
            mean = np.asarray(component["mean"], dtype=np.float64)
            if mean.ndim == 0:
                mean = np.full(shape, float(mean))
            if mean.shape != tuple(shape):
                raise ParameterError(f"Форма среднего {mean.shape} не совпадает с формой латента {tuple(shape)}")
            built.append(MixtureComponent(weight=float(component["weight"]), mean=mean,
                                          sigma=float(component.get("sigma", 0.0))))
        mixtures[label] = MixtureModel(components=tuple(built))
    return mixtures


@dataclass(frozen=True, eq=False)
class ToyWeights:
    """Фиксированные веса игрушечного денойзера."""
    lift: np.ndarray        # (C, c)
    embedding: np.ndarray   # (vocab + 1, c), последняя строка - безусловная
    kernel: np.ndarray      # (3, 3, c), depthwise свертка с циклическим дополнением
    w_q: np.ndarray         # (c, c)
    w_k: np.ndarray
    w_v: np.ndarray
    head: np.ndarray        # (c, C)


class ToyAttentionDenoiser(Denoiser):
    """
    Игрушечная замена UNet: поточечный подъем в c каналов с эмбеддингом метки,
    циклическая depthwise свертка 3×3 и tanh, один блок внимания и поточечная голова,
    предсказывающая x̂_0, которая переводится в ε̂.

    Все пространственные операции используют общие веса и циклическое дополнение,
    поэтому в режиме per_frame_self отображение коммутирует с циклическими сдвигами.
    """

    def __init__(self, weights: ToyWeights, schedule: NoiseSchedule, latent_shape: Tuple[int, int, int]):
        self.weights = weights
        self.schedule = schedule
        self.latent_shape = tuple(latent_shape)
        self.vocab = weights.embedding.shape[0] - 1

    def _embedding_row(self, cond: Optional[Conditioning]) -> np.ndarray:
        if cond is None or cond.label is None:
            return self.weights.embedding[self.vocab]
        cond.validate(self.vocab)
        return self.weights.embedding[cond.label]

    def features(self, x: np.ndarray, cond: Optional[Conditioning]) -> np.ndarray:
        """Признаки перед вниманием: tanh(u + conv(u)), u = подъем + эмбеддинг; форма (m, h, w, c)."""
        lifted = channel_matmul(x, self.weights.lift) + self._embedding_row(cond)
        mixed = np.zeros_like(lifted)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                mixed = mixed + self.weights.kernel[di + 1, dj + 1] * np.roll(lifted, (di, dj), axis=(1, 2))
        return np.tanh(lifted + mixed)

    def eval(self, latents: LatentSequence, t: int, cond: Optional[Conditioning],
             attn_mode: str) -> np.ndarray:
        if attn_mode not in ATTENTION_MODES:
            raise ParameterError(f"Неизвестный режим внимания: {attn_mode}. Доступные: {ATTENTION_MODES}")
        x = latents.data
        if tuple(x.shape[1:]) != self.latent_shape:
            raise ParameterError(f"Форма кадра {tuple(x.shape[1:])} не совпадает с {self.latent_shape}")
        alpha_bar = _noise_level(t, self.schedule)

        feats = self.features(x, cond)
        projections = [project_qkv(frame, (self.weights.w_q, self.weights.w_k, self.weights.w_v))
                       for frame in feats]
        tensors = AttentionTensors(
            Q=np.stack([p[0] for p in projections]),
            K=np.stack([p[1] for p in projections]),
            V=np.stack([p[2] for p in projections]),
        )
        if attn_mode == ATTN_CROSS:
            attended = cross_frame_attention(tensors)
        else:
            attended = per_frame_self_attention(tensors)

        attended = np.stack(attended).reshape(feats.shape)
        x0_hat = channel_matmul(attended, self.weights.head)
        return (x - math.sqrt(alpha_bar) * x0_hat) / math.sqrt(1.0 - alpha_bar)


def build_toy_attention_denoiser(seed: int, latent_shape: Tuple[int, int, int], channels: int,
                                 vocab: int, schedule: NoiseSchedule,
                                 sharpness: float = 3.0) -> ToyAttentionDenoiser:
    """
    Строит игрушечный денойзер с весами, вытянутыми один раз из сида (без обучения).

    :param seed: Сид весов
    :param latent_shape: (height, width, latent_channels)
    :param channels: Число скрытых каналов c
    :param vocab: Размер словаря меток
    :param schedule: Расписание шума для перевода x̂_0 -> ε̂
    :param sharpness: Масштаб проекции запросов, управляет остротой внимания
    :return: Денойзер
    :raises ParameterError: Если форма или размеры некорректны
    """
    if len(latent_shape) != 3 or min(latent_shape) < 1:
        raise ParameterError(f"Некорректная форма латента: {latent_shape}")
    if channels < 1 or vocab < 1:
        raise ParameterError(f"Нужно channels ≥ 1 и vocab ≥ 1, получено {channels}, {vocab}")

    latent_channels = latent_shape[2]
    rng = np.random.default_rng(seed)
    weights = ToyWeights(
        lift=rng.standard_normal((latent_channels, channels)) / math.sqrt(latent_channels),
        embedding=0.5 * rng.standard_normal((vocab + 1, channels)),
        kernel=rng.standard_normal((3, 3, channels)) / 3.0,
        w_q=sharpness * rng.standard_normal((channels, channels)) / math.sqrt(channels),
        w_k=rng.standard_normal((channels, channels)) / math.sqrt(channels),
        w_v=rng.standard_normal((channels, channels)) / math.sqrt(channels),
        head=rng.standard_normal((channels, latent_channels)) / math.sqrt(channels),
    )
    logger.debug(f"Игрушечный денойзер: сид={seed}, форма={latent_shape}, c={channels}, словарь={vocab}")
    return ToyAttentionDenoiser(weights, schedule, latent_shape)
