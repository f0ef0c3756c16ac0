"""
Tests for reading and writing 8-bit grayscale images and masks.
"""

import numpy as np
import pytest
from PIL import Image

from ahe.errors import ImageFormatError, InvalidInputError
from ahe.images import quantize, read_image, read_mask, write_image, write_mask
from ahe.services.grid import CorruptionMask, PeriodicImage


def _levels(m: int = 8) -> np.ndarray:
    return (np.arange(m * m, dtype=np.uint8) * 3).reshape(m, m)


def test_axis_zero_is_x(tmp_path) -> None:
    rows = np.zeros((4, 4), dtype=np.uint8)
    rows[0, 3] = 255  # top row, rightmost column
    Image.fromarray(rows).save(tmp_path / "dot.png")
    values = read_image(tmp_path / "dot.png")
    assert values[3, 0] == 1.0
    assert values.sum() == 1.0


def test_pgm_write_is_pixel_exact_and_mirrored(tmp_path) -> None:
    levels = _levels()
    write_image(levels.astype(np.float64) / 255.0, tmp_path / "out.pgm")
    assert (tmp_path / "out.png").is_file()
    back = np.rint(read_image(tmp_path / "out.pgm") * 255).astype(np.uint8)
    assert np.array_equal(back, levels)
    assert Image.open(tmp_path / "out.pgm").format == "PPM"


def test_quantize_clips_and_rounds() -> None:
    out = quantize(np.array([-0.2, 0.0, 0.5, 1.0, 1.7]))
    assert out.tolist() == [0, 0, 128, 255, 255]


def test_mask_threshold(tmp_path) -> None:
    raw = np.array([[0, 127], [128, 255]], dtype=np.uint8)
    Image.fromarray(raw).save(tmp_path / "mask.png")
    mask = read_mask(tmp_path / "mask.png")
    assert mask.good.T.tolist() == [[False, False], [True, True]]

    write_mask(CorruptionMask(mask.good), tmp_path / "copy.pgm")
    assert not (tmp_path / "copy.png").exists()
    assert np.array_equal(read_mask(tmp_path / "copy.pgm").good, mask.good)


def test_rejects_non_square(tmp_path) -> None:
    Image.fromarray(np.zeros((4, 6), dtype=np.uint8)).save(tmp_path / "wide.png")
    with pytest.raises(InvalidInputError, match="square"):
        read_image(tmp_path / "wide.png")


def test_rejects_colour_missing_and_garbage(tmp_path) -> None:
    Image.new("RGB", (4, 4)).save(tmp_path / "rgb.png")
    with pytest.raises(ImageFormatError, match="grayscale"):
        read_image(tmp_path / "rgb.png")
    with pytest.raises(ImageFormatError, match="not found"):
        read_image(tmp_path / "missing.pgm")
    (tmp_path / "junk.pgm").write_bytes(b"not an image")
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "junk.pgm")


def test_rejects_unknown_output_suffix(tmp_path) -> None:
    with pytest.raises(InvalidInputError):
        write_image(PeriodicImage(np.zeros((2, 2))), tmp_path / "out.jpg")
