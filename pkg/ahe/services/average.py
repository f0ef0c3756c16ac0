"""
Averaging fills
===============

Both fills peel the corrupted region from its boundary inwards. In one
round every boundary-bad pixel (a BAD pixel with at least one GOOD pixel
in its wrapped 3 × 3 neighbourhood) receives a value computed from the
GOOD pixels of that neighbourhood, then joins the GOOD set. All updates
of a round read the values from the start of the round, so the result
does not depend on the order pixels are visited in. Rounds repeat until
nothing is BAD.

* :func:`simple_average_fill` uses the plain mean of the GOOD neighbours.
* :func:`advanced_average_fill` picks the value ``X ∈ [0, 1]`` minimizing
  ``Σ |X / f(ξ) − h(x) / h(ξ)|²`` over the GOOD neighbours ``ξ``, where
  ``h`` is a smoothed reconstruction; the minimizer has the closed form
  ``h(x) Σ (f h)^{-1} / Σ f^{-2}``, clamped to ``[0, 1]``.

:func:`peel` is the shared schedule; the median baseline in the bench
module plugs its own rule into it.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from loguru import logger

from ..errors import InvalidInputError
from .grid import CorruptionMask, PeriodicImage, boundary_bad_mask, neighborhood_sum

# rule(values, good, boundary) -> values for the boundary pixels, in np.nonzero(boundary) order
FillRule = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def peel(f: PeriodicImage, mask: CorruptionMask, rule: FillRule) -> tuple[PeriodicImage, int]:
    """Run boundary-peeling rounds with ``rule``; returns the filled image and the round count."""
    if not mask.good.any():
        raise InvalidInputError("cannot fill an image without any GOOD pixel")
    values = f.values.copy()
    good = mask.good.copy()
    rounds = 0
    while not good.all():
        boundary = boundary_bad_mask(CorruptionMask(good))
        values[boundary] = rule(values, good, boundary)
        good |= boundary
        rounds += 1
    logger.debug("peeling finished after {} rounds", rounds)
    return PeriodicImage.clipped(values), rounds


def _mean_rule(values: np.ndarray, good: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    total = neighborhood_sum(np.where(good, values, 0.0))
    count = neighborhood_sum(good.astype(np.float64))
    return total[boundary] / count[boundary]


def simple_average_fill(f: PeriodicImage, mask: CorruptionMask) -> PeriodicImage:
    return peel(f, mask, _mean_rule)[0]


def synthesis_value(h_center: float, f_neighbors: np.ndarray, h_neighbors: np.ndarray) -> float:
    """Closed-form minimizer for one pixel, clamped to ``[0, 1]``."""
    num = np.sum(1.0 / (f_neighbors * h_neighbors))
    den = np.sum(f_neighbors ** -2.0)
    return float(np.clip(h_center * num / den, 0.0, 1.0))


def advanced_average_fill(f: PeriodicImage, mask: CorruptionMask, h: PeriodicImage) -> PeriodicImage:
    if h.values.shape != f.values.shape:
        raise InvalidInputError(f"smoothed image {h.values.shape} does not match {f.values.shape}")
    if np.any(h.values <= 0):
        raise InvalidInputError("the smoothed image must be strictly positive")
    if np.any(f.values[mask.good] <= 0):
        raise InvalidInputError("GOOD pixels must be strictly positive")
    hv = h.values

    def rule(values: np.ndarray, good: np.ndarray, boundary: np.ndarray) -> np.ndarray:
        safe = np.where(good, values, 1.0)
        num = neighborhood_sum(np.where(good, 1.0 / (safe * hv), 0.0))
        den = neighborhood_sum(np.where(good, safe ** -2.0, 0.0))
        return np.clip(hv[boundary] * num[boundary] / den[boundary], 0.0, 1.0)

    return peel(f, mask, rule)[0]
