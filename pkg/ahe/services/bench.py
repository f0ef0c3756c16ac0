"""
Benchmark harness
=================

Corruption generation, reconstruction metrics, the median-filter
baseline, synthetic test images and a driver that runs several
reconstruction methods on the same corrupted input and tabulates the
results with pandas.

Corruption follows the regime of the line-scratch experiments: straight
segments of a given width at random positions and orientations are
stamped onto the torus until a target fraction of pixels is BAD. The
fraction is hit exactly (to the pixel), so the achieved value is
``round(target · M²) / M²``.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..errors import InvalidInputError
from .average import peel
from .grid import CorruptionMask, PeriodicImage, ingest
from .runs import run_service

METHODS = ("average", "median", "plain", "varcoef-dr", "ahe")
SYNTHETIC_KINDS = ("stripes", "rings", "disks", "checker", "gradient")
REPORT_KEYS = ("method", "mse", "psnr_all", "psnr_bad", "seconds")


class CorruptionPattern(str, Enum):
    LINES = "lines"
    RANDOM_PIXELS = "random-pixels"


class CorruptionSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    pattern: CorruptionPattern = CorruptionPattern.LINES
    line_width: int = Field(default=3, ge=1)
    target_fraction: float = Field(default=0.37, ge=0, lt=1)
    rng_seed: int = 0


def _brush(width: int) -> np.ndarray:
    lo = -(width // 2)
    offsets = np.arange(lo, lo + width)
    ds, dt = np.meshgrid(offsets, offsets, indexing="ij")
    return np.stack([ds.ravel(), dt.ravel()], axis=1)


def _line_mask(m: int, spec: CorruptionSpec, target: int, rng: np.random.Generator) -> np.ndarray:
    bad = np.zeros((m, m), dtype=bool)
    count = 0
    brush = _brush(spec.line_width)
    while count < target:
        x0, y0 = rng.uniform(0, m, size=2)
        angle = rng.uniform(0, np.pi)
        length = rng.uniform(m / 4, m)
        for s in np.arange(0.0, length, 0.5):
            cx = int(math.floor(x0 + s * math.cos(angle))) % m
            cy = int(math.floor(y0 + s * math.sin(angle))) % m
            for ds, dt in brush:
                k, l = (cx + ds) % m, (cy + dt) % m
                if not bad[k, l]:
                    bad[k, l] = True
                    count += 1
                    if count == target:
                        return bad
    return bad


def _pixel_mask(m: int, target: int, rng: np.random.Generator) -> np.ndarray:
    bad = np.zeros(m * m, dtype=bool)
    bad[rng.choice(m * m, size=target, replace=False)] = True
    return bad.reshape(m, m)


def corrupt(img: PeriodicImage, spec: CorruptionSpec) -> Tuple[PeriodicImage, CorruptionMask]:
    """Zero a seeded random selection of pixels; the truth image itself is never modified."""
    m = img.size
    target = int(round(spec.target_fraction * m * m))
    rng = np.random.default_rng(spec.rng_seed)
    if target == 0:
        return img, CorruptionMask.all_good(m)
    if spec.pattern is CorruptionPattern.LINES:
        bad = _line_mask(m, spec, target, rng)
    else:
        bad = _pixel_mask(m, target, rng)
    mask = CorruptionMask(~bad)
    logger.debug("corrupted {} of {} pixels ({})", target, m * m, spec.pattern.value)
    return ingest(img.values, mask)


def psnr(mse: float) -> float:
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)


class MetricsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: str = ""
    mse: float
    mse_bad: float
    psnr_all: float
    psnr_bad: float
    seconds: float = 0.0

    def as_records(self) -> List[str]:
        """One ``key=value`` line per metric, stable key order."""
        data = self.model_dump()
        return [f"{key}={data[key]}" for key in REPORT_KEYS]


def metrics(
    reconstructed: PeriodicImage, truth: PeriodicImage, mask: CorruptionMask, method: str = "", seconds: float = 0.0
) -> MetricsReport:
    """MSE and PSNR over every pixel and over the BAD pixels only; an empty BAD set counts as error 0."""
    if reconstructed.values.shape != truth.values.shape or truth.values.shape != mask.good.shape:
        raise InvalidInputError("reconstruction, truth and mask must have the same size")
    err = (reconstructed.values - truth.values) ** 2
    mse = float(err.mean())
    mse_bad = float(err[mask.bad].mean()) if mask.bad_count else 0.0
    return MetricsReport(
        method=method, mse=mse, mse_bad=mse_bad, psnr_all=psnr(mse), psnr_bad=psnr(mse_bad), seconds=seconds
    )


_OFFSETS = [(s, t) for s in (-1, 0, 1) for t in (-1, 0, 1)]


def _median_rule(values: np.ndarray, good: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    masked = np.where(good, values, np.nan)
    # neighbour (k+s, l+t) of every pixel, NaN where not GOOD
    stacked = np.stack([np.roll(masked, (-s, -t), axis=(0, 1))[boundary] for s, t in _OFFSETS])
    count = np.sum(~np.isnan(stacked), axis=0)
    ordered = np.sort(stacked, axis=0)
    lower_middle = (count - 1) // 2
    return np.take_along_axis(ordered, lower_middle[None, :], axis=0)[0]


def median_filter(img: PeriodicImage, mask: CorruptionMask) -> PeriodicImage:
    """Boundary peeling where each pixel gets the lower median of its GOOD neighbours."""
    return peel(img, mask, _median_rule)[0]


def _torus_distance(m: int, cx: float, cy: float) -> np.ndarray:
    k, l = np.indices((m, m), dtype=np.float64)
    dx = np.abs(k - cx)
    dy = np.abs(l - cy)
    return np.hypot(np.minimum(dx, m - dx), np.minimum(dy, m - dy))


def synthetic_image(kind: str, m: int = 64, seed: int = 0) -> PeriodicImage:
    """Seeded periodic test pattern with gray values in [0.1, 0.9]."""
    if kind not in SYNTHETIC_KINDS:
        raise InvalidInputError(f"unknown synthetic image {kind!r}; choose from {', '.join(SYNTHETIC_KINDS)}")
    if m < 8:
        raise InvalidInputError(f"synthetic images need M ≥ 8, got {m}")
    rng = np.random.default_rng(seed)
    k, l = np.indices((m, m), dtype=np.float64)
    if kind == "stripes":
        # integer wave numbers keep the pattern periodic
        p, q = rng.integers(1, 4, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        values = 0.5 + 0.4 * np.sin(2 * np.pi * (p * k + q * l) / m + phase)
    elif kind == "rings":
        r = _torus_distance(m, *rng.uniform(0, m, size=2))
        values = 0.5 + 0.4 * np.cos(2 * np.pi * r / (m / 6))
    elif kind == "disks":
        values = np.full((m, m), 0.2)
        for _ in range(int(rng.integers(3, 7))):
            r = _torus_distance(m, *rng.uniform(0, m, size=2))
            values[r < rng.uniform(m / 12, m / 5)] = 0.85
    elif kind == "checker":
        block = max(2, m // 8)
        s, t = rng.integers(0, block, size=2)
        values = np.where((((k + s) // block) + ((l + t) // block)) % 2 == 0, 0.25, 0.8)
    else:
        phase = rng.uniform(0, 2 * np.pi, size=2)
        values = 0.5 + 0.4 * np.cos(2 * np.pi * k / m + phase[0]) * np.cos(2 * np.pi * l / m + phase[1])
    return PeriodicImage(np.clip(values, 0.1, 0.9))


def run_benchmark(
    truth: PeriodicImage,
    spec: CorruptionSpec,
    methods: Iterable[str] = ("average", "median", "ahe"),
    cfg: Optional[Mapping[str, Any]] = None,
) -> pd.DataFrame:
    """Corrupt ``truth`` once and reconstruct it with every method; one row per method."""
    from .pipeline import reconstruct

    methods = list(methods)
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise InvalidInputError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
    f, mask = corrupt(truth, spec)
    logger.info("benchmark on {}×{} at {:.1%} corruption: {}", truth.size, truth.size, mask.bad_fraction, methods)

    run_id = run_service.start("bench", methods, {"target_fraction": spec.target_fraction, "seed": spec.rng_seed})
    rows: List[Dict[str, Any]] = []
    for method in methods:
        with run_service.step(run_id, method):
            out, _ = reconstruct(method, f, mask, cfg or {})
        seconds = run_service.timings(run_id)[method]
        report = metrics(out, truth, mask, method=method, seconds=seconds)
        rows.append({key: getattr(report, key) for key in REPORT_KEYS})
    run_service.finish(run_id)
    return pd.DataFrame(rows, columns=list(REPORT_KEYS))
