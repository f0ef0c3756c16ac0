"""
Projection back to the image plane and renormalization.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from .grid import OrientationStack, PeriodicImage


def project_max(stack: OrientationStack) -> PeriodicImage:
    """Per-pixel maximum over the orientation layers (ℓ∞ projection)."""
    if stack.values.min() < 0:
        raise InvalidInputError("projection expects a non-negative stack")
    return PeriodicImage.clipped(stack.values.max(axis=2))


def renormalize(img: PeriodicImage, reference_max: float) -> PeriodicImage:
    """Rescale so the maximum becomes ``reference_max``; an all-zero image is returned as is.

    Multiplicative only: zeros stay zeros and value ratios are kept.
    """
    if not 0 < reference_max <= 1:
        raise InvalidInputError(f"reference maximum must lie in (0, 1], got {reference_max}")
    peak = img.max()
    if peak == 0:
        return img
    return PeriodicImage.clipped(img.values * (reference_max / peak))
