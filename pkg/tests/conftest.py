import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.denoisers import build_toy_attention_denoiser  # noqa: E402
from src.core.diffusion import build_schedule  # noqa: E402
from src.core.settings import GenerationConfig  # noqa: E402


@pytest.fixture(scope="session")
def schedule():
    return build_schedule()


@pytest.fixture(scope="session")
def toy_denoiser(schedule):
    return build_toy_attention_denoiser(seed=3, latent_shape=(8, 8, 2), channels=4, vocab=2, schedule=schedule)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    """Быстрая конфигурация: 8×8×2, 4 кадра, 10 шагов DDIM."""
    return GenerationConfig(frames=4, height=8, width=8, channels=2, steps=10, hidden_channels=4,
                            num_seeds=2, max_workers=2)
