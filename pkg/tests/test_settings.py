import json

import pytest

from src.core.errors import ConfigError
from src.core.settings import (
    GenerationConfig, apply_overrides, config_from_dict, config_hash, load_generation_config, validate_config,
)
from src.core.types import ATTN_CROSS


def test_defaults_are_valid():
    config = validate_config(GenerationConfig())
    assert config.t_start - config.t_mid == config.dt == 60
    assert config.attn_mode() == ATTN_CROSS
    assert config.latent_shape == (16, 16, 2)


def test_load_missing_path_gives_defaults():
    assert load_generation_config(None) == GenerationConfig()


def test_load_from_file_with_lambda_key(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"lambda": 2.5, "frames": 3}), encoding="utf-8")
    config = load_generation_config(str(path))
    assert config.lam == 2.5 and config.frames == 3
    assert config.to_dict()["lambda"] == 2.5


def test_unknown_key_raises():
    with pytest.raises(ConfigError):
        config_from_dict({"framez": 3})


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_generation_config(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_generation_config(str(broken))
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_generation_config(str(listing))


def test_dt_derives_t_mid():
    config = apply_overrides(GenerationConfig(), {"dt": 20, "t_mid": None})
    assert config.t_mid == 921
    validate_config(config)


def test_t_mid_derives_dt():
    config = apply_overrides(GenerationConfig(), {"t_mid": 900})
    assert config.dt == 41


def test_t_start_keeps_dt():
    config = apply_overrides(GenerationConfig(), {"t_start": 500})
    assert (config.t_mid, config.dt) == (440, 60)


def test_inconsistent_window_raises():
    config = apply_overrides(GenerationConfig(), {"dt": 10, "t_mid": 900})
    with pytest.raises(ConfigError):
        validate_config(config)


def test_smooth_alpha_enables_smoothing():
    assert apply_overrides(GenerationConfig(), {"smooth_alpha": 0.4}).smoothing
    assert not apply_overrides(GenerationConfig(), {"smooth_alpha": None}).smoothing


@pytest.mark.parametrize("overrides", [
    {"frames": 0},
    {"lambda": -1.0},
    {"smooth_alpha": 1.5},
    {"attn": "full"},
    {"label": 9},
    {"t_start": 1001},
    {"steps": "ten"},
    {"mixture": {"components": []}},
])
def test_invalid_values_raise(overrides):
    with pytest.raises(ConfigError):
        validate_config(apply_overrides(GenerationConfig(), overrides))


def test_hash_is_stable_and_tracks_numeric_keys():
    base = GenerationConfig()
    assert config_hash(base) == config_hash(GenerationConfig())
    assert len(config_hash(base)) == 16
    assert config_hash(apply_overrides(base, {"seed": 1})) != config_hash(base)
    assert config_hash(apply_overrides(base, {"lambda": 2.0})) != config_hash(base)


def test_hash_ignores_output_keys():
    base = GenerationConfig()
    changed = apply_overrides(base, {"out": "elsewhere", "format": "png", "max_workers": 1})
    assert config_hash(changed) == config_hash(base)
