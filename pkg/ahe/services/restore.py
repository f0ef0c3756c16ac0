"""
Static and dynamic restoration
==============================

The restoration loop interleaves full diffusion runs with re-imposition
of known values, so that the evolution cannot blur away what is already
known:

1. lift the current image (trivially unless a lift is injected);
2. run the injected evolution;
3. project and renormalize to the maximum of the pre-diffusion image;
4. reset every GOOD pixel to its stored value;
5. in DYNAMIC mode, promote every BAD pixel whose value now exceeds
   ``epsilon`` to GOOD, freezing its current value.

After ``n`` iterations the current image is returned. GOOD pixels of the
initial mask therefore always come back bit-for-bit, and the GOOD set can
only grow.
"""

from __future__ import annotations

from enum import Enum
from functools import partial
from typing import Callable, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from .grid import CorruptionMask, OrientationStack, PeriodicImage, check_consistent
from .lift import lift_trivial
from .project import project_max, renormalize

# evolution(lifted stack, image it was lifted from) -> evolved stack
Evolution = Callable[[OrientationStack, PeriodicImage], OrientationStack]
Projection = Callable[[OrientationStack], PeriodicImage]
Lift = Callable[[PeriodicImage], OrientationStack]
IterationHook = Callable[[int, PeriodicImage, CorruptionMask], None]


class RestoreMode(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class RestoreParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(default=50, ge=1)
    epsilon: float = Field(default=0.1, ge=0)
    mode: RestoreMode = RestoreMode.DYNAMIC


def restore_loop(
    f0: PeriodicImage,
    mask0: CorruptionMask,
    params: RestoreParams,
    evolve: Evolution,
    project: Projection = project_max,
    layers: int = 30,
    lift: Optional[Lift] = None,
    on_iteration: Optional[IterationHook] = None,
    progress: bool = False,
) -> PeriodicImage:
    check_consistent(f0, mask0)
    if mask0.bad_count == 0:
        return f0
    lift = lift or partial(lift_trivial, n=layers)
    fixed = f0.values.copy()
    good = mask0.good.copy()
    current = f0

    for it in tqdm(range(1, params.iterations + 1), desc="restore", disable=not progress):
        reference = current.max()
        evolved = project(evolve(lift(current), current))
        values = evolved.values if reference == 0 else renormalize(evolved, reference).values
        values = np.where(good, fixed, values)
        if params.mode is RestoreMode.DYNAMIC:
            promoted = ~good & (values > params.epsilon)
            fixed[promoted] = values[promoted]
            good |= promoted
            logger.debug("restore iteration {}: promoted {} pixels, {} still BAD", it, int(promoted.sum()), int((~good).sum()))
        current = PeriodicImage(values)
        if on_iteration is not None:
            on_iteration(it, current, CorruptionMask(good))
    return current
