"""
Varying-coefficient evolution
=============================

Hypoelliptic evolution whose intensities ``a(x, y)`` and ``b(x, y)``
change from pixel to pixel. The Fourier decoupling no longer holds, so
``[0, T]`` is cut into sub-intervals; on each one the generator is
replaced by its constant-coefficient version at ``a' = max a`` and
``b' = max b`` plus a drift frozen at the start of the interval::

    ∂ψ/∂t = Δ'_H ψ + d_i,      d_i = Δ_H ψ_{i-1} − Δ'_H ψ_{i-1}

and the resulting non-homogeneous constant-coefficient problem is solved
spectrally. The spatial operator uses two successive centered first
differences for ``(cos θ_r ∂x + sin θ_r ∂y)²`` and the cyclic second
difference for the orientation part, which are exactly the stencils
whose Fourier symbols the spectral module uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..errors import InvalidInputError
from .grid import OrientationStack, PeriodicImage, gradient_magnitude
from .spectral import get_propagator, to_spatial, to_spectral

Coefficient = Union[float, np.ndarray]


class CoefficientParams(BaseModel):
    """Constants of the exponential coefficient heuristics."""

    model_config = ConfigDict(frozen=True)

    a0: float = Field(gt=0)
    a1: float = Field(ge=0)
    b0: float = Field(gt=0)
    b1: float = Field(ge=0)
    sigma: float = Field(gt=0)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    a_vals: np.ndarray
    b_vals: np.ndarray

    def __post_init__(self) -> None:
        for name in ("a_vals", "b_vals"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise InvalidInputError(f"{name} must be a square array, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise InvalidInputError(f"{name} must be finite and strictly positive")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.a_vals.shape != self.b_vals.shape:
            raise InvalidInputError("a and b fields differ in shape")

    @classmethod
    def constant(cls, size: int, a: float, b: float) -> "CoefficientField":
        return cls(np.full((size, size), a), np.full((size, size), b))

    @property
    def size(self) -> int:
        return self.a_vals.shape[0]

    @property
    def a_max(self) -> float:
        return float(self.a_vals.max())

    @property
    def b_max(self) -> float:
        return float(self.b_vals.max())


def _from_profile(phi: np.ndarray, p: CoefficientParams) -> CoefficientField:
    weight = np.exp(-(phi ** 2) / p.sigma)
    return CoefficientField(p.a0 + p.a1 * weight, p.b0 + p.b1 * weight)


def coeffs_from_image(f: PeriodicImage, p: CoefficientParams) -> CoefficientField:
    """Strong diffusion where the image is dark (corrupted), weak where it is bright."""
    return _from_profile(f.values, p)


def coeffs_from_gradient(g: PeriodicImage, p: CoefficientParams) -> CoefficientField:
    """Strong diffusion where ``|∇g|`` peaks, i.e. on the mosaic boundaries.

    A constant image has no gradient maximum; the profile is then 1 everywhere.
    """
    mag = gradient_magnitude(g)
    peak = mag.max()
    phi = np.ones_like(mag) if peak <= 0 else 1.0 - mag / peak
    return _from_profile(phi, p)


def _centered(psi: np.ndarray, axis: int) -> np.ndarray:
    return (np.roll(psi, -1, axis=axis) - np.roll(psi, 1, axis=axis)) / 2.0


def _directional(psi: np.ndarray, cos_t: np.ndarray, sin_t: np.ndarray) -> np.ndarray:
    return cos_t * _centered(psi, 0) + sin_t * _centered(psi, 1)


def _parts(stack: OrientationStack) -> tuple[np.ndarray, np.ndarray]:
    """Spatial ``A ψ`` and ``Λ_N ψ`` (the latter with the ½ factor)."""
    psi = stack.values
    theta = stack.thetas
    cos_t, sin_t = np.cos(theta)[None, None, :], np.sin(theta)[None, None, :]
    along = _directional(_directional(psi, cos_t, sin_t), cos_t, sin_t)
    around = 0.5 * (np.roll(psi, 1, axis=2) - 2.0 * psi + np.roll(psi, -1, axis=2))
    return along, around


def _field(c: Coefficient) -> Coefficient:
    return c[:, :, None] if isinstance(c, np.ndarray) else c


def hypoelliptic_operator(
    stack: OrientationStack, a: Coefficient, b: Coefficient, scale_by_size: bool = True
) -> np.ndarray:
    """Spatial ``½ (a Λ_N ψ + b M A ψ)`` with scalar or per-pixel ``a``, ``b``."""
    along, around = _parts(stack)
    scale = stack.size if scale_by_size else 1.0
    return 0.5 * (_field(a) * around + scale * _field(b) * along)


def frozen_drift(stack: OrientationStack, coeffs: CoefficientField, scale_by_size: bool = True) -> np.ndarray:
    """``Δ_H ψ − Δ'_H ψ``; identically zero when the field is spatially constant."""
    return hypoelliptic_operator(
        stack, coeffs.a_vals - coeffs.a_max, coeffs.b_vals - coeffs.b_max, scale_by_size
    )


def evolve_varcoef(
    stack: OrientationStack,
    coeffs: CoefficientField,
    t: float,
    substeps: int = 20,
    cn_steps_per_substep: int = 5,
    scale_by_size: bool = True,
) -> OrientationStack:
    """Frozen-coefficient-plus-drift evolution to time ``t``, clamped at the end."""
    if t <= 0:
        raise InvalidInputError(f"final time must be positive, got {t}")
    if substeps < 1 or cn_steps_per_substep < 1:
        raise InvalidInputError("substeps and cn_steps_per_substep must be at least 1")
    if coeffs.size != stack.size:
        raise InvalidInputError(f"coefficient field is {coeffs.size}×{coeffs.size}, stack is {stack.size}×{stack.size}")

    a_max, b_max = coeffs.a_max, coeffs.b_max
    dt = t / (substeps * cn_steps_per_substep)
    prop = get_propagator(
        stack.size, stack.layers, a_max, b_max, dt, cn_steps_per_substep, scale_by_size, with_source=True
    )
    logger.debug(
        "evolve_varcoef T={} substeps={}x{} a'={:.4g} b'={:.4g}", t, substeps, cn_steps_per_substep, a_max, b_max
    )
    current = stack
    for _ in range(substeps):
        drift = OrientationStack(frozen_drift(current, coeffs, scale_by_size))
        state = prop.apply(to_spectral(current), to_spectral(drift))
        current = to_spatial(state)
    return OrientationStack(np.maximum(current.values, 0.0))
