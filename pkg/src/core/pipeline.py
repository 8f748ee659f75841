"""
Сквозная генерация видео без обучения и сетка абляций.

Порядок: стартовый латент первого кадра -> латенты с движением ->
совместный DDIM всех кадров с вниманием по выбранному режиму -> опциональное
сглаживание фона.
"""

import logging
import concurrent.futures
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..utils import spawn_streams
from .denoisers import (
    Denoiser, build_toy_attention_denoiser, default_mixtures, mixture_from_config,
    mixture_sequence_denoiser,
)
from .diffusion import ddim_sample, inversion_roundtrip, make_step_grid
from .errors import ParameterError, PipelineError
from .metrics import consistency_metrics, median_report
from .motion import motion_latents
from .settings import GenerationConfig, config_hash
from .smoothing import load_masks, smooth_sequence, synthetic_mask_provider
from .types import (
    AblationTable, ForegroundMask, GenerationResult, Latent, LatentSequence, MetricsReport,
    MixtureModel, NoiseSchedule, TraceRecord,
)

logger = logging.getLogger(__name__)

ABLATION_STUDIES = ("components", "dt", "smoothing")

TraceCallback = Callable[[TraceRecord], None]
ProgressCallback = Callable[[int, int, str], None]


@dataclass(frozen=True)
class AblationJob:
    """Один запуск абляции: вариант, его конфигурация и сид."""
    variant: str
    config: GenerationConfig
    motion: bool
    seed: int


def initial_latent(config: GenerationConfig, rng: Optional[np.random.Generator] = None) -> Latent:
    """
    x^1_T ~ N(0, I) на шаге t_start.

    :param config: Конфигурация
    :param rng: Генератор; по умолчанию первый поток из сида конфигурации
    :return: Стартовый латент первого кадра
    """
    if rng is None:
        rng = spawn_streams(config.seed)[0]
    return Latent(data=rng.standard_normal(config.latent_shape), t=config.t_start)


def build_mixtures(config: GenerationConfig) -> Dict[Optional[int], MixtureModel]:
    if config.mixture is not None:
        return mixture_from_config(config.mixture, config.latent_shape)
    return default_mixtures(config.latent_shape, config.vocab, config.denoiser_seed)


def build_denoiser(config: GenerationConfig, schedule: NoiseSchedule) -> Denoiser:
    """
    Денойзер по конфигурации: 'toy' - игрушечный с вниманием, 'mixture' - оракул смеси.

    :raises ParameterError: Если тип денойзера неизвестен
    """
    if config.denoiser == "toy":
        return build_toy_attention_denoiser(config.denoiser_seed, config.latent_shape, config.hidden_channels,
                                            config.vocab, schedule, config.attn_sharpness)
    if config.denoiser == "mixture":
        return mixture_sequence_denoiser(build_mixtures(config), schedule)
    raise ParameterError(f"Неизвестный денойзер: {config.denoiser}")


def metrics_mixture(config: GenerationConfig) -> Optional[MixtureModel]:
    """Смесь для метрики расстояния до моды (только для денойзера-оракула)."""
    if config.denoiser != "mixture":
        return None
    mixtures = build_mixtures(config)
    return mixtures.get(config.label, mixtures.get(None))


def _iid_latents(x1_T: Latent, m: int, rng: np.random.Generator) -> LatentSequence:
    # Первый кадр общий, остальные - свежие независимые латенты
    frames = [x1_T.data] + [rng.standard_normal(x1_T.data.shape) for _ in range(m - 1)]
    return LatentSequence(data=np.stack(frames), t=x1_T.t)


def _smoothing_time(grid: Sequence[int], t_mid: int) -> int:
    """Первая положительная точка сетки не выше T′; если такой нет - последняя положительная."""
    positive = [t for t in grid if t > 0]
    for t in positive:
        if t <= t_mid:
            return t
    logger.warning(f"На сетке нет положительного шага ≤ T′={t_mid}, сглаживание на шаге {positive[-1]}")
    return positive[-1]


def _masks_for(config: GenerationConfig, latents: LatentSequence) -> List[ForegroundMask]:
    shape = (config.height, config.width)
    if config.mask_dir:
        return load_masks(config.mask_dir, shape, config.frames)
    return synthetic_mask_provider(config.mask_kind, shape, config.motion_field(),
                                   radius=config.mask_radius, level=config.mask_threshold,
                                   latents=latents)


def generate_video(config: GenerationConfig, trace_callback: Optional[TraceCallback] = None,
                   motion: bool = True) -> GenerationResult:
    """
    Генерирует m согласованных кадров.

    :param config: Проверенная конфигурация
    :param trace_callback: Вызывается для каждой записи трассы (шаг, кадр)
    :param motion: False - независимые латенты кадров 2..m вместо латентов с движением
    :return: Чистые кадры, стартовые латенты и трасса
    :raises PipelineError: Если любой модуль упал; содержит стадию и шаг
    """
    stage, timestep = "initial", config.t_start
    trace: List[TraceRecord] = []
    state = {"step": 0, "t": config.t_start}
    try:
        schedule = config.build_schedule()
        window = config.time_window()
        field = config.motion_field()
        cond = config.conditioning()
        attn_mode = config.attn_mode()
        x1_rng, motion_rng, iid_rng = spawn_streams(config.seed)

        denoiser = build_denoiser(config, schedule)
        x1_T = initial_latent(config, x1_rng)

        stage = "motion"
        if motion:
            initial = motion_latents(x1_T, window, field, denoiser, schedule, cond, motion_rng,
                                     config.window_stride, attn_mode)
        else:
            initial = _iid_latents(x1_T, config.frames, iid_rng)

        stage = "sampling"
        grid = make_step_grid(config.t_start, config.steps)
        apply_at = {_smoothing_time(grid, config.t_mid)} if config.smoothing else set()
        params = config.smoothing_params(apply_at)
        smoothing_on = config.smoothing

        def smooth(latents: LatentSequence) -> LatentSequence:
            return smooth_sequence(latents, _masks_for(config, latents), field, params)

        def step_hook(t: int, t_prev: int, latents: LatentSequence, eps: np.ndarray) -> Optional[LatentSequence]:
            smoothed = smoothing_on and params.applies(t_prev)
            if smoothed:
                latents = smooth(latents)
            for k in range(latents.num_frames):
                record = TraceRecord(
                    step=state["step"], t=t, t_prev=t_prev, frame=k,
                    latent_norm=float(np.linalg.norm(latents.data[k])),
                    eps_norm=float(np.linalg.norm(eps[k])),
                    smoothed=smoothed,
                )
                trace.append(record)
                if trace_callback is not None:
                    trace_callback(record)
            state["step"] += 1
            state["t"] = t_prev
            return latents if smoothed else None

        start = initial
        if smoothing_on and params.applies(grid[0]):
            # Δt = 0: сглаживание на стартовом шаге, до первого шага DDIM
            start = smooth(initial)

        frames = ddim_sample(start, denoiser, schedule, grid, cond, attn_mode, step_hook)
    except Exception as e:
        if stage == "sampling":
            timestep = state["t"]
        raise PipelineError(str(e), stage, timestep) from e

    logger.debug(f"Сгенерировано кадров: {frames.num_frames}, шагов DDIM: {state['step']}")
    return GenerationResult(frames=frames, initial=initial, trace=trace, config_hash=config_hash(config))


def ablation_jobs(config: GenerationConfig, study: str = "components") -> Tuple[List[str], List[AblationJob]]:
    """
    Список запусков абляции по всем вариантам и сидам seed .. seed + num_seeds - 1.

    components: {движение в латентах вкл/выкл} × {межкадровое внимание вкл/выкл};
    dt: перебор Δt из dt_sweep (движение и межкадровое внимание включены);
    smoothing: сглаживание фона выкл/вкл.

    :return: (имена вариантов по порядку, задания)
    :raises ParameterError: Если тип абляции неизвестен
    """
    if study == "components":
        variants = [
            ("iid_self", replace(config, attn="self"), False),
            ("iid_cross", replace(config, attn="cross"), False),
            ("motion_self", replace(config, attn="self"), True),
            ("motion_cross", replace(config, attn="cross"), True),
        ]
    elif study == "dt":
        variants = [(f"dt_{dt}", replace(config, attn="cross", dt=dt, t_mid=config.t_start - dt), True)
                    for dt in config.dt_sweep]
    elif study == "smoothing":
        variants = [
            ("smoothing_off", replace(config, attn="cross", smoothing=False), True),
            ("smoothing_on", replace(config, attn="cross", smoothing=True), True),
        ]
    else:
        raise ParameterError(f"Неизвестный тип абляции: {study}. Доступные: {ABLATION_STUDIES}")

    seeds = [config.seed + i for i in range(config.num_seeds)]
    jobs = [AblationJob(variant=name, config=replace(variant_config, seed=seed), motion=motion, seed=seed)
            for name, variant_config, motion in variants for seed in seeds]
    return [name for name, _, _ in variants], jobs


def _run_job(job: AblationJob) -> MetricsReport:
    result = generate_video(job.config, motion=job.motion)
    return consistency_metrics(result.frames, job.config.motion_field(), metrics_mixture(job.config),
                               variant=job.variant, seed=job.seed, config_hash=result.config_hash)


def ablate(config: GenerationConfig, study: str = "components",
           progress_callback: Optional[ProgressCallback] = None) -> AblationTable:
    """
    Прогоняет абляцию и сводит метрики в таблицу медиан по сидам.

    Запуски независимы и выполняются в пуле потоков; результаты собираются по индексу,
    поэтому таблица не зависит от порядка завершения.

    :param config: Проверенная конфигурация
    :param study: 'components', 'dt' или 'smoothing'
    :param progress_callback: Функция (current, total, variant)
    :return: Таблица абляции
    :raises PipelineError: Если один из запусков упал
    """
    variants, jobs = ablation_jobs(config, study)
    results: List[Optional[MetricsReport]] = [None] * len(jobs)
    logger.info(f"Абляция '{study}': {len(variants)} вариантов × {config.num_seeds} сидов")

    with concurrent.futures.ThreadPoolExecutor(max_workers=config.max_workers) as executor:
        future_to_index = {executor.submit(_run_job, job): i for i, job in enumerate(jobs)}

        completed = 0
        for future in concurrent.futures.as_completed(future_to_index):
            index = future_to_index[future]
            try:
                results[index] = future.result()
            except PipelineError as e:
                logger.error(f"Вариант '{jobs[index].variant}', сид {jobs[index].seed}: {e}")
                raise
            completed += 1
            if progress_callback:
                progress_callback(completed, len(jobs), jobs[index].variant)

    table_hash = config_hash(config)
    rows = []
    for variant in variants:
        reports = [report for report, job in zip(results, jobs) if job.variant == variant]
        rows.append(median_report(reports, variant, table_hash))

    seeds = sorted({job.seed for job in jobs})
    return AblationTable(study=study, rows=rows, seeds=seeds, config_hash=table_hash)


def sample_data_latent(config: GenerationConfig, rng: np.random.Generator) -> Latent:
    """Чистый латент x_0 из смеси конфигурации: выбирается компонента, добавляется ее шум."""
    mixtures = build_mixtures(config)
    mixture = mixtures.get(config.label, mixtures.get(None))
    index = int(rng.choice(len(mixture.components), p=mixture.weights))
    component = mixture.components[index]
    data = np.asarray(component.mean, dtype=np.float64)
    if component.sigma > 0:
        data = data + component.sigma * rng.standard_normal(data.shape)
    return Latent(data=data, t=0)


def inversion_report(config: GenerationConfig, step_counts: Sequence[int] = (25, 50, 100)) -> Dict[str, float]:
    """
    Ошибка восстановления инверсия∘семплирование для нескольких размеров сетки.

    :param config: Проверенная конфигурация
    :param step_counts: Размеры сеток DDIM
    :return: Словарь "число шагов" -> относительная L2 ошибка
    :raises PipelineError: Если инверсия или семплирование упали
    """
    schedule = config.build_schedule()
    cond = config.conditioning()
    attn_mode = config.attn_mode()
    try:
        denoiser = build_denoiser(config, schedule)
        x_0 = sample_data_latent(config, spawn_streams(config.seed)[0])
        errors = {}
        for steps in step_counts:
            _, errors[str(steps)] = inversion_roundtrip(x_0, denoiser, schedule, config.t_start, steps,
                                                        cond, attn_mode)
            logger.info(f"Инверсия на {steps} шагах: относительная ошибка {errors[str(steps)]:.3e}")
    except Exception as e:
        raise PipelineError(str(e), "inversion") from e
    return errors
