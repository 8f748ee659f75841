import json
import os

import pytest

from main import run_cli

SMALL = {"height": 8, "width": 8, "channels": 2, "frames": 3, "steps": 8, "hidden_channels": 4,
         "num_seeds": 1, "max_workers": 1}


@pytest.fixture
def small_config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL), encoding="utf-8")
    return str(path)


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def test_generate_single_frame(tmp_path, small_config_file):
    out = tmp_path / "out"
    code = run_cli(["generate", "--config", small_config_file, "--frames", "1", "--seed", "7", "--out", str(out)])
    assert code == 0
    assert sorted(os.listdir(out)) == ["frame_000.pgm", "metrics.json"]
    metrics = read_json(out / "metrics.json")
    assert metrics["frames"] == 1
    assert metrics["inter_frame_mse"] == 0.0
    assert metrics["seed"] == 7


def test_generate_default_window_with_smoothing(tmp_path, small_config_file):
    out = tmp_path / "out"
    code = run_cli(["generate", "--config", small_config_file, "--dt", "60", "--t-start", "941", "--t-mid", "881",
                    "--smooth-alpha", "0.6", "--format", "png", "--trace", "--out", str(out)])
    assert code == 0
    assert (out / "frame_002.png").exists()
    with open(out / "trace.jsonl", encoding="utf-8") as f:
        records = [json.loads(line) for line in f]
    assert len(records) == SMALL["steps"] * SMALL["frames"]
    assert any(record["smoothed"] for record in records)


def test_generate_is_deterministic(tmp_path, small_config_file):
    for name in ("a", "b"):
        assert run_cli(["generate", "--config", small_config_file, "--seed", "3", "--out", str(tmp_path / name)]) == 0
    assert read_json(tmp_path / "a" / "metrics.json") == read_json(tmp_path / "b" / "metrics.json")
    with open(tmp_path / "a" / "frame_001.pgm", "rb") as a, open(tmp_path / "b" / "frame_001.pgm", "rb") as b:
        assert a.read() == b.read()


@pytest.mark.parametrize("argv", [
    ["generate", "--bogus"],
    ["generate", "--attn", "full"],
    ["unknown"],
    [],
])
def test_usage_errors(argv):
    assert run_cli(argv) == 2


def test_bad_config_values(tmp_path, small_config_file):
    assert run_cli(["generate", "--config", small_config_file, "--lambda", "-1", "--out", str(tmp_path)]) == 2
    assert run_cli(["generate", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"framez": 2}), encoding="utf-8")
    assert run_cli(["generate", "--config", str(bad)]) == 2


def test_ablate_writes_table(tmp_path, small_config_file):
    out = tmp_path / "ablation"
    assert run_cli(["ablate", "--config", small_config_file, "--num-seeds", "1", "--out", str(out)]) == 0
    table = read_json(out / "ablation.json")
    assert [row["variant"] for row in table["rows"]] == ["iid_self", "iid_cross", "motion_self", "motion_cross"]


def test_invert_writes_errors(tmp_path, small_config_file):
    out = tmp_path / "inv"
    assert run_cli(["invert", "--config", small_config_file, "--steps", "10", "--out", str(out)]) == 0
    report = read_json(out / "inversion.json")
    assert set(report["errors"]) == {"10"}
    assert report["t_start"] == 941


def test_metrics_of_written_frames(tmp_path, small_config_file):
    frames = tmp_path / "frames"
    assert run_cli(["generate", "--config", small_config_file, "--out", str(frames)]) == 0
    scored = tmp_path / "scored"
    assert run_cli(["metrics", str(frames), "--config", small_config_file, "--out", str(scored)]) == 0
    metrics = read_json(scored / "metrics.json")
    assert metrics["variant"] == "scored"
    assert metrics["frames"] == SMALL["frames"]


def test_metrics_of_missing_directory(tmp_path):
    assert run_cli(["metrics", str(tmp_path / "nothing")]) == 1


@pytest.mark.parametrize("command", [["ablate"], ["invert"], ["metrics", "frames"]])
def test_trace_only_for_generate(tmp_path, command):
    assert run_cli(command + ["--trace", "--out", str(tmp_path / "out")]) == 2
    assert not (tmp_path / "out" / "trace.jsonl").exists()
