import numpy as np
import pytest
from numpy.testing import assert_array_equal

from src.core.metrics import (
    consistency_metrics, estimate_displacement, mean_displacement, median_report, nearest_mode_distance,
)
from src.core.motion import translation_flow, warp_array
from src.core.types import LatentSequence, MetricsReport, MixtureComponent, MixtureModel, MotionField


def test_identical_frames_score_zero(rng):
    frame = rng.standard_normal((6, 6, 2))
    frames = LatentSequence(data=np.stack([frame] * 4), t=0)
    report = consistency_metrics(frames, MotionField(lam=0.0, m=4))
    assert report.inter_frame_mse == 0.0
    assert report.warped_inconsistency == 0.0
    assert report.mean_displacement == 0.0
    assert report.nearest_mode_distance == []


def test_exact_translations_have_zero_warped_inconsistency(rng):
    field = MotionField(lam=1.0, delta=(1.0, 2.0), m=5)
    frame = rng.standard_normal((8, 8, 2))
    frames = np.stack([warp_array(frame, shift) for shift in translation_flow(field)])
    report = consistency_metrics(LatentSequence(data=frames, t=0), field)
    assert report.warped_inconsistency == 0.0
    assert report.inter_frame_mse > 0.0


def test_iid_frames_inter_frame_mse():
    rng = np.random.default_rng(31)
    frames = LatentSequence(data=rng.standard_normal((200, 16, 16, 2)), t=0)
    report = consistency_metrics(frames, MotionField(m=200))
    assert report.inter_frame_mse == pytest.approx(2.0, rel=0.1)


def test_single_frame_metrics(rng):
    report = consistency_metrics(LatentSequence(data=rng.standard_normal((1, 4, 4, 1)), t=0), MotionField(m=1))
    assert report.inter_frame_mse == 0.0 and report.warped_inconsistency == 0.0


def test_displacement_estimate(rng):
    frame = rng.standard_normal((16, 16, 2))
    moved = warp_array(frame, (2.0, -3.0))
    assert_array_equal(estimate_displacement(frame, moved), [2.0, -3.0])


def test_displacement_grows_with_lambda(rng):
    frame = rng.standard_normal((16, 16, 1))
    values = []
    for lam in (0.0, 1.0, 2.0, 3.0):
        field = MotionField(lam=lam, delta=(1.0, 1.0), m=4)
        frames = np.stack([warp_array(frame, shift) for shift in translation_flow(field)])
        values.append(mean_displacement(frames))
    assert all(a < b for a, b in zip(values, values[1:]))


def test_nearest_mode_distance(rng):
    mean = rng.standard_normal((2, 2, 1))
    mixture = MixtureModel(components=(MixtureComponent(0.5, mean), MixtureComponent(0.5, -mean)))
    frames = np.stack([mean, -mean + 0.1])
    distances = nearest_mode_distance(frames, mixture)
    assert distances[0] == 0.0
    assert distances[1] == pytest.approx(0.2)


def test_metrics_are_finite_and_nonnegative(rng):
    frames = LatentSequence(data=rng.standard_normal((3, 5, 5, 2)), t=0)
    report = consistency_metrics(frames, MotionField(m=3), seed=4, config_hash="abc")
    for value in (report.inter_frame_mse, report.warped_inconsistency, report.mean_displacement):
        assert np.isfinite(value) and value >= 0
    assert report.to_dict()["seed"] == 4


def test_median_report():
    reports = [MetricsReport(inter_frame_mse=v, warped_inconsistency=2 * v, mean_displacement=0.0)
               for v in (1.0, 5.0, 2.0)]
    median = median_report(reports, "motion_cross")
    assert median.inter_frame_mse == 2.0
    assert median.warped_inconsistency == 4.0
    assert median.variant == "motion_cross"
