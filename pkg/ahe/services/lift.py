"""
Lifts
=====

Turn an image into an orientation stack.

* :func:`lift_gradient` puts each pixel value on the single layer closest
  to the slope angle of the level curve through the pixel, and spreads it
  evenly over all layers where the gradient vanishes.
* :func:`lift_trivial` spreads every pixel evenly over all layers.
* :func:`lift_constant_angle` and :func:`lift_orientation_only` are the two
  synthetic lifts used to show how anisotropic the evolution is.

An optional isotropic Gaussian pre-smoothing (:func:`gaussian_smooth`)
is exposed separately; callers decide whether to apply it.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from .grid import OrientationStack, PeriodicImage, gradient_field


def _require_layers(n: int) -> None:
    if n < 2:
        raise InvalidInputError(f"at least two orientation layers are required, got {n}")


def _torus_kernel(m: int, radius: float) -> np.ndarray:
    # distance to the origin on the torus along one axis
    idx = np.arange(m)
    d = np.minimum(idx, m - idx).astype(np.float64)
    g = np.exp(-(d ** 2) / (2.0 * radius ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def gaussian_smooth(img: PeriodicImage, radius: float) -> PeriodicImage:
    """Circular convolution with a normalized sampled Gaussian of std ``radius`` px."""
    if radius < 0:
        raise InvalidInputError(f"smoothing radius must be non-negative, got {radius}")
    if radius == 0:
        return img
    kernel = _torus_kernel(img.size, radius)
    out = np.fft.ifft2(np.fft.fft2(img.values) * np.fft.fft2(kernel)).real
    return PeriodicImage.clipped(out)


def nearest_layer(theta: np.ndarray, n: int) -> np.ndarray:
    """Index of the grid angle nearest to ``theta`` modulo π; ties go to the smaller index."""
    u = np.mod(theta, np.pi) * n / np.pi
    return np.mod(np.ceil(u - 0.5), n).astype(np.int64)


def slope_angles(img: PeriodicImage) -> tuple[np.ndarray, np.ndarray]:
    """Level-curve angle per pixel (mod π) and the mask of pixels where it is defined."""
    gx, gy = gradient_field(img)
    theta = np.mod(np.arctan2(-gx, gy), np.pi)
    defined = (np.abs(gx) + np.abs(gy)) > 0
    return theta, defined


def _place(values: np.ndarray, layer: np.ndarray, n: int) -> np.ndarray:
    m = values.shape[0]
    out = np.zeros((m, m, n))
    k, l = np.indices(values.shape)
    out[k, l, layer] = values
    return out


def lift_gradient(img: PeriodicImage, n: int) -> OrientationStack:
    _require_layers(n)
    theta, defined = slope_angles(img)
    out = _place(img.values, nearest_layer(theta, n), n)
    # critical points: spread evenly
    out[~defined] = (img.values[~defined] / n)[:, None]
    return OrientationStack(out)


def lift_trivial(img: PeriodicImage, n: int) -> OrientationStack:
    _require_layers(n)
    spread = img.values / n
    return OrientationStack(np.repeat(spread[:, :, None], n, axis=2))


def lift_constant_angle(img: PeriodicImage, n: int, theta: float) -> OrientationStack:
    _require_layers(n)
    layer = np.full(img.values.shape, nearest_layer(np.asarray(theta), n))
    return OrientationStack(_place(img.values, layer, n))


def lift_orientation_only(img: PeriodicImage, n: int, level: float = 0.5) -> OrientationStack:
    """Gradient lift whose non-zero entries all carry the same ``level``.

    Only the orientation information of the image survives.
    """
    stack = lift_gradient(img, n).values
    return OrientationStack(np.where(stack > 0, level, 0.0))
