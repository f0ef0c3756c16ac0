"""
Grid types
==========

Periodic gray-level images, corruption masks and orientation stacks, plus
the finite-difference gradient shared by the lift and the coefficient
heuristics.

Conventions:

* images are square ``M × M`` arrays indexed ``(k, l)``; ``k`` runs along
  the x axis (array axis 0) and ``l`` along y (axis 1);
* the grid is a torus, every neighbourhood and difference wraps around;
* gray values live in ``[0, 1]`` with 0 marking a corrupted pixel, so
  non-corrupted pixels must be strictly positive;
* an orientation stack carries ``N`` layers ``θ_r = rπ/N``, cyclic in ``r``.

All types are frozen and hold read-only arrays, so they can be shared
between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Set, Tuple

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError

# Smallest positive 8-bit gray step; GOOD pixels at exactly 0 are lifted to it.
GRAY_STEP = 1.0 / 255.0

_NEIGHBORHOOD = np.ones((3, 3))

Pixel = Tuple[int, int]


def _frozen(values: np.ndarray, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PeriodicImage:
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
            raise InvalidInputError(f"image must be a square M×M array with M ≥ 2, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidInputError(f"gray values must lie in [0, 1], got [{arr.min()}, {arr.max()}]")
        object.__setattr__(self, "values", _frozen(arr))

    @classmethod
    def clipped(cls, values: np.ndarray) -> "PeriodicImage":
        """Build an image from raw numbers, clipping to ``[0, 1]``."""
        return cls(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0))

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, at: Pixel) -> float:
        k, l = at
        return float(self.values[k % self.size, l % self.size])

    def max(self) -> float:
        return float(self.values.max())

    def shifted(self, s: int, t: int) -> "PeriodicImage":
        return PeriodicImage(np.roll(self.values, (s, t), axis=(0, 1)))


@dataclass(frozen=True, eq=False)
class CorruptionMask:
    """Per-pixel labels; ``good[k, l]`` is True for GOOD, False for BAD."""

    good: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.good)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidInputError(f"mask must be square, got shape {arr.shape}")
        object.__setattr__(self, "good", _frozen(arr, dtype=bool))

    @classmethod
    def from_image(cls, img: PeriodicImage) -> "CorruptionMask":
        return cls(img.values > 0.0)

    @classmethod
    def all_good(cls, size: int) -> "CorruptionMask":
        return cls(np.ones((size, size), dtype=bool))

    @property
    def size(self) -> int:
        return self.good.shape[0]

    @property
    def bad(self) -> np.ndarray:
        return ~self.good

    @property
    def bad_count(self) -> int:
        return int(self.bad.sum())

    @property
    def bad_fraction(self) -> float:
        return self.bad_count / self.good.size

    def promote(self, pixels: np.ndarray) -> "CorruptionMask":
        """Return a mask where the boolean selection ``pixels`` is GOOD as well."""
        return CorruptionMask(self.good | pixels)


@dataclass(frozen=True, eq=False)
class OrientationStack:
    """``M × M × N`` lifted image; layer ``r`` holds the orientation ``rπ/N``."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[2] < 1:
            raise InvalidInputError(f"stack must have shape M×M×N, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("stack contains non-finite values")
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def layers(self) -> int:
        return self.values.shape[2]

    @property
    def thetas(self) -> np.ndarray:
        return layer_angles(self.layers)

    def total(self) -> float:
        return float(self.values.sum())


def layer_angles(n: int) -> np.ndarray:
    return np.arange(n) * np.pi / n


def gradient_field(img: PeriodicImage) -> Tuple[np.ndarray, np.ndarray]:
    """Centered differences with periodic wrap over the whole grid."""
    f = img.values
    gx = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / 2.0
    gy = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / 2.0
    return gx, gy


def finite_gradient(img: PeriodicImage, at: Pixel) -> Tuple[float, float]:
    m = img.size
    k, l = at[0] % m, at[1] % m
    gx = (img[k + 1, l] - img[k - 1, l]) / 2.0
    gy = (img[k, l + 1] - img[k, l - 1]) / 2.0
    return gx, gy


def gradient_magnitude(img: PeriodicImage) -> np.ndarray:
    gx, gy = gradient_field(img)
    return np.hypot(gx, gy)


def neighborhood_sum(values: np.ndarray) -> np.ndarray:
    """Sum over the wrapped 9-point neighbourhood of every pixel."""
    return ndimage.correlate(values, _NEIGHBORHOOD, mode="wrap")


def good_neighbor_count(mask: CorruptionMask) -> np.ndarray:
    return np.rint(neighborhood_sum(mask.good.astype(np.float64))).astype(np.int64)


def boundary_bad_mask(mask: CorruptionMask) -> np.ndarray:
    return mask.bad & (good_neighbor_count(mask) > 0)


def boundary_bad(mask: CorruptionMask) -> Set[Pixel]:
    ks, ls = np.nonzero(boundary_bad_mask(mask))
    return {(int(k), int(l)) for k, l in zip(ks, ls)}


def ingest(values: np.ndarray, mask: Optional[CorruptionMask] = None) -> Tuple[PeriodicImage, CorruptionMask]:
    """Build a consistent (image, mask) pair from raw gray values in ``[0, 1]``.

    Without a mask, BAD is "value is 0". With one, BAD pixels are zeroed
    and GOOD pixels at exactly 0 are raised to :data:`GRAY_STEP` so that
    every GOOD pixel is strictly positive.
    """
    arr = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    if mask is None:
        img = PeriodicImage(arr)
        return img, CorruptionMask.from_image(img)
    if mask.good.shape != arr.shape:
        raise InvalidInputError(f"mask shape {mask.good.shape} does not match image shape {arr.shape}")
    arr = np.where(mask.good, np.maximum(arr, GRAY_STEP), 0.0)
    return PeriodicImage(arr), mask


def check_consistent(img: PeriodicImage, mask: CorruptionMask) -> None:
    if img.values.shape != mask.good.shape:
        raise InvalidInputError(f"image {img.values.shape} and mask {mask.good.shape} differ in size")
    if np.any(img.values[mask.bad] != 0.0):
        raise InvalidInputError("BAD pixels must carry the value 0")
    if np.any(img.values[mask.good] <= 0.0):
        raise InvalidInputError("GOOD pixels must be strictly positive")
