"""
Image and mask files.

8-bit grayscale only. Binary PGM (P5) is the interchange format and
PNG is accepted on input; every written PGM gets a PNG mirror next to it.
Arrays are returned with axis 0 running along x (image columns), the
convention of :mod:`ahe.services.grid`.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
from loguru import logger
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError, InvalidInputError
from .services.grid import CorruptionMask, PeriodicImage

PathLike = Union[str, Path]

_SUFFIXES = {".pgm": "PPM", ".png": "PNG"}


def _read_gray(path: PathLike) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "1"):
                raise ImageFormatError(f"{path}: expected an 8-bit grayscale image, got mode {img.mode}")
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
    except FileNotFoundError as e:
        raise ImageFormatError(f"{path}: file not found") from e
    except (UnidentifiedImageError, OSError) as e:
        if isinstance(e, ImageFormatError):
            raise
        raise ImageFormatError(f"{path}: cannot decode image: {e}") from e
    if arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"{path}: only square images are supported, got {arr.shape[1]}×{arr.shape[0]}")
    return arr.T


def quantize(values: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def read_image(path: PathLike) -> np.ndarray:
    """Gray values in ``[0, 1]`` (8-bit level divided by 255)."""
    return _read_gray(path).astype(np.float64) / 255.0


def read_mask(path: PathLike) -> CorruptionMask:
    """Pixels above 127 are GOOD."""
    return CorruptionMask(_read_gray(path) > 127)


def _write_gray(arr: np.ndarray, path: PathLike, mirror: bool = True) -> Path:
    path = Path(path)
    fmt = _SUFFIXES.get(path.suffix.lower())
    if fmt is None:
        raise InvalidInputError(f"{path}: output must end in .pgm or .png")
    path.parent.mkdir(parents=True, exist_ok=True)
    img = Image.fromarray(np.ascontiguousarray(arr.T))
    try:
        img.save(path, format=fmt)
        if mirror and fmt == "PPM":
            img.save(path.with_suffix(".png"), format="PNG")
    except OSError as e:
        raise ImageFormatError(f"{path}: cannot write image: {e}") from e
    logger.debug("wrote {}", path)
    return path


def write_image(img: Union[PeriodicImage, np.ndarray], path: PathLike, mirror: bool = True) -> Path:
    values = img.values if isinstance(img, PeriodicImage) else np.asarray(img)
    return _write_gray(quantize(values), path, mirror)


def write_mask(mask: CorruptionMask, path: PathLike, mirror: bool = False) -> Path:
    return _write_gray(np.where(mask.good, 255, 0).astype(np.uint8), path, mirror)
