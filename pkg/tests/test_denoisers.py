import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.denoisers import (
    build_toy_attention_denoiser, default_mixtures, mixture_from_config, mixture_posterior_eps,
    mixture_posterior_mean, mixture_sequence_denoiser,
)
from src.core.diffusion import build_schedule_from_betas, ddim_sample, make_step_grid
from src.core.errors import ConditioningError, DegenerateNoiseError, ParameterError
from src.core.motion import warp_array
from src.core.types import (
    ATTN_CROSS, ATTN_SELF, Conditioning, Latent, LatentSequence, MixtureComponent, MixtureModel,
)


def two_point(mean):
    return MixtureModel(components=(
        MixtureComponent(weight=0.5, mean=mean),
        MixtureComponent(weight=0.5, mean=-mean),
    ))


# --- модель смеси ---

@pytest.mark.parametrize("weights", [(0.5, 0.4), (1.2, -0.2), (0.0, 1.0)])
def test_mixture_rejects_bad_weights(weights):
    with pytest.raises(ParameterError):
        MixtureModel(components=(MixtureComponent(weights[0], np.zeros(2)),
                                 MixtureComponent(weights[1], np.ones(2))))


def test_mixture_rejects_duplicate_means():
    with pytest.raises(ParameterError):
        MixtureModel(components=(MixtureComponent(0.5, np.ones(2)), MixtureComponent(0.5, np.ones(2))))


def test_mixture_rejects_non_finite_means():
    with pytest.raises(ParameterError):
        MixtureModel(components=(MixtureComponent(1.0, np.array([np.nan, 0.0])),))


# --- оракул ---

def test_single_component_eps_exact(schedule, rng):
    mean = rng.standard_normal((3, 3, 2))
    mixture = MixtureModel(components=(MixtureComponent(1.0, mean),))
    x = Latent(data=rng.standard_normal((3, 3, 2)), t=300)
    ab = schedule.alpha_bar(300)
    expected = (x.data - math.sqrt(ab) * mean) / math.sqrt(1 - ab)
    assert_allclose(mixture_posterior_eps(x, 300, mixture, schedule), expected, rtol=1e-13)


def test_symmetric_mixture_at_origin(schedule, rng):
    x = Latent(data=np.zeros((2, 2, 1)), t=100)
    eps = mixture_posterior_eps(x, 100, two_point(rng.standard_normal((2, 2, 1))), schedule)
    assert_allclose(eps, 0.0, atol=1e-15)


def test_degenerate_noise_raises(rng):
    schedule = build_schedule_from_betas([0.1, 0.2])
    x = Latent(data=np.zeros((1, 1, 1)), t=0)
    with pytest.raises(DegenerateNoiseError):
        mixture_posterior_eps(x, 0, two_point(np.ones((1, 1, 1))), schedule)


def test_tweedie_consistency(schedule, rng):
    mixture = MixtureModel(components=(
        MixtureComponent(0.2, rng.standard_normal((4, 4, 1))),
        MixtureComponent(0.3, rng.standard_normal((4, 4, 1))),
        MixtureComponent(0.5, rng.standard_normal((4, 4, 1))),
    ))
    x = Latent(data=rng.standard_normal((4, 4, 1)), t=700)
    ab = schedule.alpha_bar(700)
    eps = mixture_posterior_eps(x, 700, mixture, schedule)
    reconstructed = (x.data - math.sqrt(1 - ab) * eps) / math.sqrt(ab)
    posterior = mixture_posterior_mean(x, 700, mixture, schedule)
    assert np.linalg.norm(reconstructed - posterior) <= 1e-10 * max(np.linalg.norm(posterior), 1.0)


def test_posterior_mean_matches_monte_carlo(schedule):
    rng = np.random.default_rng(2024)
    means = [np.array([1.0, 0.0]), np.array([-1.0, 0.5]), np.array([0.0, -1.0])]
    weights = [0.2, 0.5, 0.3]
    mixture = MixtureModel(components=tuple(
        MixtureComponent(w, m.reshape(1, 1, 2)) for w, m in zip(weights, means)))
    t = 500
    ab = schedule.alpha_bar(t)
    x_t = rng.standard_normal((1, 1, 2))

    # Самонормированная оценка: x_0 из априорного, вес - правдоподобие p(x_t | x_0)
    samples = 1_000_000
    index = rng.choice(3, size=samples, p=weights)
    x0 = np.stack(means)[index]
    log_lik = -((x_t.reshape(1, 2) - math.sqrt(ab) * x0) ** 2).sum(axis=1) / (2 * (1 - ab))
    lik = np.exp(log_lik - log_lik.max())
    estimate = (lik[:, None] * x0).sum(axis=0) / lik.sum()

    exact = mixture_posterior_mean(Latent(data=x_t, t=t), t, mixture, schedule).reshape(2)
    assert np.linalg.norm(exact - estimate) <= 0.01 * max(np.linalg.norm(m) for m in means)


def test_gaussian_component_posterior(schedule, rng):
    mixture = MixtureModel(components=(MixtureComponent(1.0, np.zeros((2, 2, 1)), sigma=1.0),))
    x = Latent(data=rng.standard_normal((2, 2, 1)), t=400)
    ab = schedule.alpha_bar(400)
    assert_allclose(mixture_posterior_mean(x, 400, mixture, schedule), math.sqrt(ab) * x.data, rtol=1e-12)


def test_oracle_sampling_concentrates(schedule):
    rng = np.random.default_rng(77)
    base = rng.standard_normal((4, 4, 1))
    mixture = MixtureModel(components=(
        MixtureComponent(0.3, 4.0 * base),
        MixtureComponent(0.3, -4.0 * base),
        MixtureComponent(0.4, 4.0 * np.roll(base, 1, axis=0) + 2.0),
    ))
    denoiser = mixture_sequence_denoiser(mixture, schedule)
    batch = LatentSequence(data=rng.standard_normal((500, 4, 4, 1)), t=941)
    samples = ddim_sample(batch, denoiser, schedule, make_step_grid(941, 50)).data

    means = mixture.means
    distances = np.sqrt(((samples[:, None] - means[None]) ** 2).reshape(500, 3, -1).sum(axis=-1)).min(axis=1)
    assert np.mean(distances <= 1e-2) >= 0.99


# --- адаптер последовательности ---

def test_sequence_adapter_matches_oracle(schedule, rng):
    mixture = two_point(rng.standard_normal((3, 3, 1)))
    denoiser = mixture_sequence_denoiser(mixture, schedule)
    frames = rng.standard_normal((3, 3, 3, 1))
    out = denoiser.eval(LatentSequence(data=frames, t=200), 200, None, ATTN_CROSS)
    for k in range(3):
        assert_array_equal(out[k], mixture_posterior_eps(Latent(frames[k], 200), 200, mixture, schedule))


def test_sequence_adapter_identical_frames(schedule, rng):
    denoiser = mixture_sequence_denoiser(two_point(rng.standard_normal((2, 2, 1))), schedule)
    frame = rng.standard_normal((2, 2, 1))
    out = denoiser.eval(LatentSequence(data=np.stack([frame] * 3), t=50), 50, None, ATTN_SELF)
    assert_array_equal(out[0], out[1])
    assert_array_equal(out[1], out[2])


def test_label_selects_mixture(schedule, rng):
    mixtures = default_mixtures((2, 2, 1), vocab=2, seed=5)
    denoiser = mixture_sequence_denoiser(mixtures, schedule)
    x = LatentSequence(data=rng.standard_normal((1, 2, 2, 1)), t=300)
    first = denoiser.eval(x, 300, Conditioning(0), ATTN_SELF)
    second = denoiser.eval(x, 300, Conditioning(1), ATTN_SELF)
    assert not np.array_equal(first, second)


def test_unknown_label_raises(schedule, rng):
    denoiser = mixture_sequence_denoiser(default_mixtures((2, 2, 1), vocab=2, seed=5), schedule)
    x = LatentSequence(data=rng.standard_normal((1, 2, 2, 1)), t=300)
    with pytest.raises(ConditioningError):
        denoiser.eval(x, 300, Conditioning(7), ATTN_SELF)


def test_mixture_from_config_scalar_and_grid():
    mixtures_config = {
        "0": [{"weight": 0.5, "mean": 1.0}, {"weight": 0.5, "mean": -1.0, "sigma": 0.1}],
        "null": [{"weight": 1.0, "mean": [[[0.0], [1.0]], [[2.0], [3.0]]]}],
    }
    mixtures = mixture_from_config(mixtures_config, (2, 2, 1))
    assert set(mixtures) == {0, None}
    assert_array_equal(mixtures[0].means[0], np.ones((2, 2, 1)))
    assert mixtures[0].sigmas.tolist() == [0.0, 0.1]
    assert mixtures[None].means[0][1, 1, 0] == 3.0


def test_mixture_from_config_shape_mismatch():
    with pytest.raises(ParameterError):
        mixture_from_config({"0": [{"weight": 1.0, "mean": [1.0, 2.0]}]}, (2, 2, 1))


# --- игрушечный денойзер ---

@pytest.mark.parametrize("shift", [(1, 0), (0, 3), (-2, 5)])
def test_toy_denoiser_translation_equivariant(toy_denoiser, rng, shift):
    x = rng.standard_normal((2, 8, 8, 2))
    shifted = np.stack([warp_array(frame, shift) for frame in x])
    out = toy_denoiser.eval(LatentSequence(data=x, t=600), 600, Conditioning(1), ATTN_SELF)
    out_shifted = toy_denoiser.eval(LatentSequence(data=shifted, t=600), 600, Conditioning(1), ATTN_SELF)
    for k in range(2):
        assert_array_equal(out_shifted[k], warp_array(out[k], shift))


def test_toy_denoiser_identical_frames_cross(toy_denoiser, rng):
    frame = rng.standard_normal((8, 8, 2))
    out = toy_denoiser.eval(LatentSequence(data=np.stack([frame] * 3), t=500), 500, None, ATTN_CROSS)
    assert_array_equal(out[0], out[1])
    assert_array_equal(out[0], out[2])


def test_toy_denoiser_self_mode_frame_independence(toy_denoiser, rng):
    x = rng.standard_normal((3, 8, 8, 2))
    zeroed = x.copy()
    zeroed[1:] = 0.0
    a = toy_denoiser.eval(LatentSequence(data=x, t=500), 500, None, ATTN_SELF)
    b = toy_denoiser.eval(LatentSequence(data=zeroed, t=500), 500, None, ATTN_SELF)
    assert_array_equal(a[0], b[0])


def test_toy_denoiser_cross_mode_uses_first_frame(toy_denoiser, rng):
    x = rng.standard_normal((2, 8, 8, 2))
    self_out = toy_denoiser.eval(LatentSequence(data=x, t=500), 500, None, ATTN_SELF)
    cross_out = toy_denoiser.eval(LatentSequence(data=x, t=500), 500, None, ATTN_CROSS)
    assert_array_equal(self_out[0], cross_out[0])
    assert not np.array_equal(self_out[1], cross_out[1])


def test_toy_denoiser_deterministic(schedule, rng):
    x = LatentSequence(data=rng.standard_normal((2, 8, 8, 2)), t=300)
    outputs = []
    for _ in range(2):
        denoiser = build_toy_attention_denoiser(seed=9, latent_shape=(8, 8, 2), channels=4, vocab=2,
                                                schedule=schedule)
        outputs.append(denoiser.eval(x, 300, Conditioning(0), ATTN_SELF))
    assert_array_equal(outputs[0], outputs[1])
    assert outputs[0].shape == x.data.shape


def test_toy_denoiser_label_changes_output(toy_denoiser, rng):
    x = LatentSequence(data=rng.standard_normal((1, 8, 8, 2)), t=300)
    a = toy_denoiser.eval(x, 300, Conditioning(0), ATTN_SELF)
    b = toy_denoiser.eval(x, 300, Conditioning(1), ATTN_SELF)
    assert not np.array_equal(a, b)


def test_toy_denoiser_rejects_bad_inputs(toy_denoiser, schedule, rng):
    with pytest.raises(ConditioningError):
        toy_denoiser.eval(LatentSequence(data=rng.standard_normal((1, 8, 8, 2)), t=3), 3, Conditioning(5), ATTN_SELF)
    with pytest.raises(ParameterError):
        toy_denoiser.eval(LatentSequence(data=rng.standard_normal((1, 4, 4, 2)), t=3), 3, None, ATTN_SELF)
    with pytest.raises(ParameterError):
        build_toy_attention_denoiser(seed=0, latent_shape=(8, 8), channels=4, vocab=2, schedule=schedule)
