import os

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from PIL import Image

from src.core.errors import ParameterError
from src.core.frame_io import list_frame_files, quantize_frame, read_frames, write_frames
from src.core.types import LatentSequence


def test_single_frame_writes_one_file(tmp_path, rng):
    paths = write_frames(LatentSequence(data=rng.standard_normal((1, 4, 4, 2)), t=0), str(tmp_path))
    assert [os.path.basename(p) for p in paths] == ["frame_000.pgm"]
    with open(paths[0], "rb") as f:
        assert f.read(2) == b"P5"


def test_constant_frame_is_gray():
    assert_array_equal(quantize_frame(np.full((3, 3, 2), 5.0)), np.full((3, 3), 128, dtype=np.uint8))


def test_quantization_range_and_monotonicity(rng):
    frame = rng.standard_normal((6, 6, 1))
    image = quantize_frame(frame)
    assert image.min() == 0 and image.max() == 255
    order = np.argsort(frame.ravel(), kind="stable")
    assert np.all(np.diff(image.ravel()[order].astype(int)) >= 0)


@pytest.mark.parametrize("fmt", ["pgm", "png"])
def test_written_frames_read_back(tmp_path, rng, fmt):
    data = rng.standard_normal((3, 5, 7, 2))
    write_frames(LatentSequence(data=data, t=0), str(tmp_path), fmt)
    frames = read_frames(str(tmp_path))
    assert frames.data.shape == (3, 5, 7, 1)
    for k in range(3):
        assert_array_equal(frames.data[k, ..., 0], quantize_frame(data[k]).astype(np.float64))


def test_unknown_format(tmp_path, rng):
    with pytest.raises(ParameterError):
        write_frames(LatentSequence(data=rng.standard_normal((1, 2, 2, 1)), t=0), str(tmp_path), "jpg")


def test_natural_sort(tmp_path):
    for k in (10, 2, 1):
        Image.fromarray(np.full((2, 2), k, dtype=np.uint8), mode="L").save(tmp_path / f"frame_{k}.pgm", format="PPM")
    (tmp_path / "notes.txt").write_text("x")
    names = [os.path.basename(p) for p in list_frame_files(str(tmp_path))]
    assert names == ["frame_1.pgm", "frame_2.pgm", "frame_10.pgm"]
    assert read_frames(str(tmp_path)).data[:, 0, 0, 0].tolist() == [1.0, 2.0, 10.0]


def test_read_errors(tmp_path):
    with pytest.raises(ParameterError):
        read_frames(str(tmp_path / "missing"))
    with pytest.raises(ParameterError):
        read_frames(str(tmp_path))
    Image.fromarray(np.zeros((2, 2), dtype=np.uint8), mode="L").save(tmp_path / "frame_000.pgm", format="PPM")
    Image.fromarray(np.zeros((3, 2), dtype=np.uint8), mode="L").save(tmp_path / "frame_001.pgm", format="PPM")
    with pytest.raises(ParameterError):
        read_frames(str(tmp_path))
