"""
Механика диффузии: расписания шума, прямой процесс DDPM и детерминированный DDIM,
включая DDIM инверсию.
Все функции чистые: случайность приходит только через явно переданный генератор.
"""

import math
import logging
from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import NumericError, ParameterError
from .types import ATTN_SELF, Conditioning, Latent, LatentSequence, NoiseSchedule

logger = logging.getLogger(__name__)

Latents = Union[Latent, LatentSequence]

# Хук шага семплирования: (t, t_prev, латенты после шага, ε̂) -> замена латентов или None
StepHook = Callable[[int, int, Latents, np.ndarray], Optional[Latents]]

SCHEDULE_KINDS = ("linear", "scaled_linear")


def build_schedule(N: int = 1000,
                   beta_start: float = 0.00085,
                   beta_end: float = 0.012,
                   kind: str = "scaled_linear") -> NoiseSchedule:
    """
    Строит расписание шума.

    linear интерполирует β линейно, scaled_linear интерполирует sqrt(β) линейно
    (соглашение Stable Diffusion).

    :param N: Количество шагов диффузии
    :param beta_start: β_1
    :param beta_end: β_N
    :param kind: 'linear' или 'scaled_linear'
    :return: Расписание шума
    :raises ParameterError: Если параметры вне допустимых диапазонов
    """
    if N < 1:
        raise ParameterError(f"Число шагов расписания должно быть ≥ 1, получено {N}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ParameterError(
            f"Нужно 0 < beta_start ≤ beta_end < 1, получено {beta_start}, {beta_end}"
        )

    if kind == "linear":
        betas = np.linspace(beta_start, beta_end, N, dtype=np.float64)
    elif kind == "scaled_linear":
        betas = np.linspace(math.sqrt(beta_start), math.sqrt(beta_end), N, dtype=np.float64) ** 2
    else:
        raise ParameterError(f"Неизвестный тип расписания: {kind}. Доступные: {SCHEDULE_KINDS}")

    schedule = build_schedule_from_betas(betas, kind=kind)
    logger.debug(f"Расписание {kind}: N={N}, ᾱ_N={schedule.alpha_bars[-1]:.3e}")
    return schedule


def build_schedule_from_betas(betas: Sequence[float], kind: str = "custom") -> NoiseSchedule:
    """
    Строит расписание из явного списка β.

    :param betas: Значения β_1..β_N, каждое в (0, 1)
    :param kind: Метка типа расписания
    :return: Расписание шума
    :raises ParameterError: Если список пуст или β вне (0, 1)
    """
    betas = np.asarray(betas, dtype=np.float64)
    if betas.ndim != 1 or betas.size == 0:
        raise ParameterError("Список β должен быть непустым одномерным")
    if np.any(betas <= 0.0) or np.any(betas >= 1.0):
        raise ParameterError("Все β должны лежать в интервале (0, 1)")

    # cumprod умножает последовательно, как и прямой цикл по произведению
    alpha_bars = np.cumprod(1.0 - betas)
    return NoiseSchedule(betas=betas, alpha_bars=alpha_bars, kind=kind)


def make_step_grid(t_start: int, steps: int, t_end: int = 0) -> List[int]:
    """
    Равномерная убывающая сетка шагов от t_start до t_end включительно.

    :param t_start: Начальный шаг
    :param steps: Число переходов (точек сетки на одну больше)
    :param t_end: Конечный шаг
    :return: Строго убывающий список шагов
    """
    if steps < 1:
        raise ParameterError(f"Число шагов сетки должно быть ≥ 1, получено {steps}")
    if t_start < t_end:
        raise ParameterError(f"Начало сетки {t_start} меньше конца {t_end}")

    points = np.floor(np.linspace(t_start, t_end, steps + 1) + 0.5).astype(int)
    grid: List[int] = []
    for point in points.tolist():
        if not grid or point < grid[-1]:
            grid.append(point)
    return grid


def _check_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{what} содержит не конечные значения")


def ddpm_forward(x: Latents, t_to: int, schedule: NoiseSchedule,
                 rng: np.random.Generator) -> Latents:
    """
    Зашумляет латент одним прыжком по замкнутой маргинали прямого процесса.

    x_to = sqrt(ᾱ_to/ᾱ_from)·x_from + sqrt(1 - ᾱ_to/ᾱ_from)·ε. При t_to == t_from
    возвращает вход без обращения к генератору.

    :param x: Латент (или последовательность) на шаге t_from
    :param t_to: Целевой шаг
    :param schedule: Расписание шума
    :param rng: Генератор случайных чисел
    :return: Латент на шаге t_to
    :raises ParameterError: Если t_to < t_from
    """
    if t_to < x.t:
        raise ParameterError(f"Прямой процесс идет только вперед: t_from={x.t}, t_to={t_to}")
    _check_finite(x.data, "Вход ddpm_forward")
    if t_to == x.t:
        return x

    ratio = schedule.alpha_bar(t_to) / schedule.alpha_bar(x.t)
    noise = rng.standard_normal(x.data.shape)
    data = math.sqrt(ratio) * x.data + math.sqrt(1.0 - ratio) * noise
    return replace(x, data=data, t=t_to)


def ddim_step(x_t: Latents, t: int, t_prev: int, eps: np.ndarray,
              schedule: NoiseSchedule) -> Latents:
    """
    Один детерминированный шаг DDIM с t на t_prev.

    :param x_t: Латент на шаге t
    :param t: Текущий шаг
    :param t_prev: Целевой шаг, 0 ≤ t_prev < t
    :param eps: Предсказанный шум той же формы
    :param schedule: Расписание шума
    :return: Латент на шаге t_prev
    :raises ParameterError: Если t_prev ≥ t или формы не совпадают
    """
    if not 0 <= t_prev < t:
        raise ParameterError(f"Шаг DDIM требует 0 ≤ t_prev < t, получено t={t}, t_prev={t_prev}")
    if eps.shape != x_t.data.shape:
        raise ParameterError(f"Форма ε {eps.shape} не совпадает с формой латента {x_t.data.shape}")

    alpha_bar_t = schedule.alpha_bar(t)
    alpha_bar_prev = schedule.alpha_bar(t_prev)
    pred_x0 = (x_t.data - math.sqrt(1.0 - alpha_bar_t) * eps) / math.sqrt(alpha_bar_t)
    data = math.sqrt(alpha_bar_prev) * pred_x0 + math.sqrt(1.0 - alpha_bar_prev) * eps
    return replace(x_t, data=data, t=t_prev)


def _ddim_forward_step(x_s: Latents, t_next: int, eps: np.ndarray,
                       schedule: NoiseSchedule) -> Latents:
    # Тот же закон DDIM, пройденный снизу вверх: s -> t_next
    alpha_bar_s = schedule.alpha_bar(x_s.t)
    alpha_bar_next = schedule.alpha_bar(t_next)
    pred_x0 = (x_s.data - math.sqrt(1.0 - alpha_bar_s) * eps) / math.sqrt(alpha_bar_s)
    data = math.sqrt(alpha_bar_next) * pred_x0 + math.sqrt(1.0 - alpha_bar_next) * eps
    return replace(x_s, data=data, t=t_next)


def predict_eps(denoiser, x: Latents, t: int, cond: Optional[Conditioning],
                attn_mode: str = ATTN_SELF) -> np.ndarray:
    """
    Запрашивает ε̂ у денойзера; одиночный Latent отправляется как последовательность из одного кадра.

    :return: ε̂ той же формы, что и x.data
    """
    if isinstance(x, Latent):
        sequence = LatentSequence(data=x.data[None], t=t)
        return denoiser.eval(sequence, t, cond, attn_mode)[0]
    return denoiser.eval(replace(x, t=t), t, cond, attn_mode)


def _descending_path(x_T: Latents, step_indices: Sequence[int]) -> List[int]:
    path = [int(t) for t in step_indices]
    if not path:
        raise ParameterError("Сетка шагов DDIM пуста")
    if any(a <= b for a, b in zip(path, path[1:])):
        raise ParameterError(f"Сетка шагов DDIM должна строго убывать: {path}")
    if path[0] != x_T.t:
        raise ParameterError(f"Сетка начинается с {path[0]}, а латент находится на шаге {x_T.t}")
    if path[-1] < 0:
        raise ParameterError("Шаги сетки не могут быть отрицательными")
    return path


def ddim_sample(x_T: Latents, denoiser, schedule: NoiseSchedule,
                step_indices: Sequence[int], cond: Optional[Conditioning] = None,
                attn_mode: str = ATTN_SELF,
                step_hook: Optional[StepHook] = None) -> Latents:
    """
    Полный проход DDIM: свертка ddim_step по убывающей сетке, последний переход ведет в 0.

    :param x_T: Стартовый латент (или последовательность) на шаге step_indices[0]
    :param denoiser: Объект с методом eval(latents, t, cond, attn_mode)
    :param schedule: Расписание шума
    :param step_indices: Строго убывающая сетка шагов
    :param cond: Условие генерации
    :param attn_mode: Режим внимания денойзера
    :param step_hook: Хук после каждого шага; может вернуть измененные латенты
    :return: Латент на шаге 0
    :raises ParameterError: Если сетка не убывает или не согласована с x_T
    """
    path = _descending_path(x_T, step_indices)
    if path[-1] != 0:
        path.append(0)
    return ddim_backward(x_T, denoiser, schedule, path, cond, attn_mode, step_hook)


def ddim_backward(x_t: Latents, denoiser, schedule: NoiseSchedule,
                  step_indices: Sequence[int], cond: Optional[Conditioning] = None,
                  attn_mode: str = ATTN_SELF,
                  step_hook: Optional[StepHook] = None) -> Latents:
    """
    Шаги DDIM назад строго по заданной сетке, без добавления финального перехода в 0.

    :param x_t: Латент на шаге step_indices[0]
    :param step_indices: Строго убывающая сетка шагов
    :return: Латент на шаге step_indices[-1]
    """
    path = _descending_path(x_t, step_indices)
    x = x_t
    for t, t_prev in zip(path, path[1:]):
        eps = predict_eps(denoiser, x, t, cond, attn_mode)
        x = ddim_step(x, t, t_prev, eps, schedule)
        if step_hook is not None:
            replacement = step_hook(t, t_prev, x, eps)
            if replacement is not None:
                x = replacement
    return x


def ddim_invert(x_0: Latents, denoiser, schedule: NoiseSchedule,
                step_indices: Sequence[int], cond: Optional[Conditioning] = None,
                attn_mode: str = ATTN_SELF) -> Latents:
    """
    DDIM инверсия: рекуррентность DDIM в обратном порядке, от чистого латента к шуму.

    ε̂ для перехода s -> t оценивается на латенте уровня s с шагом t
    (стандартное приближение первого порядка).

    :param x_0: Чистый латент (t = 0)
    :param step_indices: Строго возрастающая сетка; если она не начинается с x_0.t, он добавляется
    :return: Латент на последнем шаге сетки
    :raises ParameterError: Если сетка не возрастает
    """
    path = [int(t) for t in step_indices]
    if any(a >= b for a, b in zip(path, path[1:])):
        raise ParameterError(f"Сетка инверсии должна строго возрастать: {path}")
    if not path:
        return x_0
    if path[0] != x_0.t:
        if path[0] < x_0.t:
            raise ParameterError(f"Сетка инверсии начинается ниже текущего шага {x_0.t}")
        path.insert(0, x_0.t)

    x = x_0
    for t_next in path[1:]:
        eps = predict_eps(denoiser, x, t_next, cond, attn_mode)
        x = _ddim_forward_step(x, t_next, eps, schedule)
    return x


def eps_from_mu(mu: np.ndarray, x_t: Latents, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """
    Переводит среднее апостериорного шага μ в эквивалентный шум ε.

    Решает μ = (x_t - β_t/sqrt(1-ᾱ_t)·ε)/sqrt(1-β_t) относительно ε.

    :raises ParameterError: Если t вне 1..N или формы не совпадают
    """
    if mu.shape != x_t.data.shape:
        raise ParameterError(f"Форма μ {mu.shape} не совпадает с формой латента {x_t.data.shape}")
    beta_t = schedule.beta(t)
    alpha_bar_t = schedule.alpha_bar(t)
    return (x_t.data - math.sqrt(1.0 - beta_t) * mu) * math.sqrt(1.0 - alpha_bar_t) / beta_t


def mu_from_eps(eps: np.ndarray, x_t: Latents, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """Среднее апостериорного шага DDPM по предсказанному шуму (обратно к eps_from_mu)."""
    if eps.shape != x_t.data.shape:
        raise ParameterError(f"Форма ε {eps.shape} не совпадает с формой латента {x_t.data.shape}")
    beta_t = schedule.beta(t)
    alpha_bar_t = schedule.alpha_bar(t)
    return (x_t.data - beta_t / math.sqrt(1.0 - alpha_bar_t) * eps) / math.sqrt(1.0 - beta_t)


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    """Относительная L2 ошибка ‖a - b‖ / ‖b‖."""
    denom = float(np.linalg.norm(b))
    return float(np.linalg.norm(a - b)) / denom if denom > 0 else float(np.linalg.norm(a))


def inversion_roundtrip(x_0: Latents, denoiser, schedule: NoiseSchedule, t_end: int,
                        steps: int, cond: Optional[Conditioning] = None,
                        attn_mode: str = ATTN_SELF) -> Tuple[Latents, float]:
    """
    Инверсия и обратное семплирование по одной и той же сетке.

    :return: (восстановленный x_0, относительная L2 ошибка восстановления)
    """
    grid = make_step_grid(t_end, steps)
    noisy = ddim_invert(x_0, denoiser, schedule, grid[::-1], cond, attn_mode)
    restored = ddim_sample(noisy, denoiser, schedule, grid, cond, attn_mode)
    error = relative_l2(restored.data, x_0.data)
    logger.debug(f"Инверсия на {steps} шагах до t={t_end}: ошибка {error:.3e}")
    return restored, error
