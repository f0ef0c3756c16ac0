"""
Reconstruction pipelines
========================

Three end-to-end flows built from the services:

* :func:`run_plain` lifts the image, evolves it with constant
  coefficients, projects and renormalizes; with restore parameters the
  whole pass becomes the evolution of a static or dynamic restoration
  loop.
* :func:`run_varcoef_dr` runs dynamic restoration with the
  varying-coefficient evolution, the coefficients recomputed from the
  current image at every iteration.
* :func:`run_ahe` is the four-step averaging-and-hypoelliptic algorithm:
  simple averaging, strong smoothing, advanced averaging guided by the
  smoothed image, weak smoothing.

Every invocation is recorded with :data:`~ahe.services.runs.run_service`
as a run whose plan mirrors the pipeline's stages. :func:`reconstruct`
dispatches a method name and a flat parameter mapping (preset, config
file and flags merged) to the right pipeline; the CLI and the benchmark
both go through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..config import load_preset, preset_names
from ..errors import InvalidInputError
from .average import advanced_average_fill, simple_average_fill
from .bench import median_filter
from .grid import GRAY_STEP, CorruptionMask, OrientationStack, PeriodicImage, check_consistent, gradient_magnitude
from .lift import gaussian_smooth, lift_constant_angle, lift_gradient, lift_orientation_only, lift_trivial
from .project import project_max, renormalize
from .restore import RestoreMode, RestoreParams, restore_loop
from .runs import run_service
from .spectral import evolve_const
from .varcoef import CoefficientParams, coeffs_from_gradient, coeffs_from_image, evolve_varcoef

Lift = Callable[[PeriodicImage], OrientationStack]

STEP2_DEFAULTS = CoefficientParams(a0=0.55, a1=5, b0=0.05, b1=0.2, sigma=0.4)
STEP4_DEFAULTS = CoefficientParams(a0=0.75, a1=1.5, b0=0.015, b1=0.1, sigma=0.3)
DR_DEFAULTS = CoefficientParams(a0=1.1, a1=10, b0=0.1, b1=0.4, sigma=0.1)

# pre-smoothing for the plain pipeline; AHE never smooths before its trivial lift
PLAIN_SMOOTHING_RADIUS = 1.0

DEMOS = ("final-times", "anisotropy", "orientation", "mosaic")


class LiftMode(str, Enum):
    GRADIENT = "gradient"
    TRIVIAL = "trivial"


class AheConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    layers: int = Field(default=30, ge=2)
    step2: CoefficientParams = STEP2_DEFAULTS
    step4: CoefficientParams = STEP4_DEFAULTS
    step2_time: float = Field(default=1.0, gt=0)
    step4_time: float = Field(default=1.0, gt=0)
    substeps: int = Field(default=20, ge=1)
    cn_steps: int = Field(default=5, ge=1)
    emit_intermediates: bool = False
    scale_by_size: bool = True

    @classmethod
    def from_params(cls, params: Mapping[str, Any]) -> "AheConfig":
        """Build from flat keys (``step2_a0`` … ``step4_sigma``, ``layers``, ``final_time`` …)."""

        def coefficients(prefix: str, base: CoefficientParams) -> CoefficientParams:
            values = base.model_dump()
            for key in values:
                if f"{prefix}_{key}" in params:
                    values[key] = params[f"{prefix}_{key}"]
            return CoefficientParams(**values)

        final_time = params.get("final_time", 1.0)
        return cls(
            layers=params.get("layers", 30),
            step2=coefficients("step2", STEP2_DEFAULTS),
            step4=coefficients("step4", STEP4_DEFAULTS),
            step2_time=params.get("step2_time", final_time),
            step4_time=params.get("step4_time", final_time),
            substeps=params.get("substeps", 20),
            cn_steps=params.get("cn_steps", 5),
            emit_intermediates=params.get("emit_intermediates", False),
            scale_by_size=params.get("scale_by_size", True),
        )


@dataclass(frozen=True)
class AheResult:
    image: PeriodicImage
    # averaged, gradient, smoothed, synthesized; empty unless requested
    intermediates: Dict[str, PeriodicImage] = field(default_factory=dict)
    run_id: Optional[str] = None


def _single_pass(
    f: PeriodicImage, lift: Lift, a: float, b: float, t: float, steps: Optional[int], scale_by_size: bool
) -> PeriodicImage:
    reference = f.max()
    evolved = project_max(evolve_const(lift(f), a, b, t, steps, scale_by_size))
    return evolved if reference == 0 else renormalize(evolved, reference)


def _make_lift(mode: LiftMode, n: int, smoothing_radius: Optional[float]) -> Lift:
    if mode is LiftMode.TRIVIAL:
        return lambda img: lift_trivial(img, n)
    if not smoothing_radius:
        return lambda img: lift_gradient(img, n)
    # orientation from the smoothed image, values from the smoothed image too
    return lambda img: lift_gradient(gaussian_smooth(img, smoothing_radius), n)


def run_plain(
    f: PeriodicImage,
    mask: CorruptionMask,
    a: float,
    b: float,
    n: int = 30,
    lift_mode: LiftMode = LiftMode.GRADIENT,
    restore: Optional[RestoreParams] = None,
    t: float = 1.0,
    steps: Optional[int] = None,
    smoothing_radius: Optional[float] = PLAIN_SMOOTHING_RADIUS,
    scale_by_size: bool = True,
    progress: bool = False,
) -> PeriodicImage:
    lift_mode = LiftMode(lift_mode)
    lift = _make_lift(lift_mode, n, smoothing_radius)
    params = {"a": a, "b": b, "layers": n, "lift": lift_mode.value, "final_time": t}
    if restore is None:
        run_id = run_service.start("plain", ["evolve"], params)
        with run_service.step(run_id, "evolve"):
            out = _single_pass(f, lift, a, b, t, steps, scale_by_size)
        run_service.finish(run_id)
        return out

    run_id = run_service.start("plain", ["restore"], {**params, **restore.model_dump(mode="json")})
    with run_service.step(run_id, "restore"):
        out = restore_loop(
            f,
            mask,
            restore,
            evolve=lambda stack, _img: evolve_const(stack, a, b, t, steps, scale_by_size),
            layers=n,
            lift=lift,
            on_iteration=_progress_hook(run_id),
            progress=progress,
        )
    run_service.finish(run_id)
    return out


def _progress_hook(run_id: str) -> Callable[[int, PeriodicImage, CorruptionMask], None]:
    def hook(it: int, _img: PeriodicImage, mask: CorruptionMask) -> None:
        run_service.log(run_id, f"iteration {it}", bad=mask.bad_count)

    return hook


def run_varcoef_dr(
    f: PeriodicImage,
    mask: CorruptionMask,
    p: CoefficientParams,
    restore: RestoreParams,
    n: int = 30,
    t: float = 1.0,
    substeps: int = 20,
    cn_steps: int = 5,
    scale_by_size: bool = True,
    progress: bool = False,
) -> PeriodicImage:
    params = {**p.model_dump(), **restore.model_dump(mode="json"), "layers": n, "final_time": t}
    run_id = run_service.start("varcoef-dr", ["restore"], params)

    def evolve(stack: OrientationStack, img: PeriodicImage) -> OrientationStack:
        return evolve_varcoef(stack, coeffs_from_image(img, p), t, substeps, cn_steps, scale_by_size)

    with run_service.step(run_id, "restore"):
        out = restore_loop(
            f, mask, restore, evolve=evolve, layers=n, on_iteration=_progress_hook(run_id), progress=progress
        )
    run_service.finish(run_id)
    return out


def _smooth(img: PeriodicImage, p: CoefficientParams, t: float, cfg: AheConfig) -> PeriodicImage:
    coeffs = coeffs_from_gradient(img, p)
    stack = evolve_varcoef(lift_trivial(img, cfg.layers), coeffs, t, cfg.substeps, cfg.cn_steps, cfg.scale_by_size)
    return renormalize(project_max(stack), img.max())


AHE_PLAN = ("simple-average", "strong-smoothing", "advanced-average", "weak-smoothing")


def run_ahe(f: PeriodicImage, mask: CorruptionMask, cfg: Optional[AheConfig] = None) -> AheResult:
    cfg = cfg or AheConfig()
    check_consistent(f, mask)
    run_id = run_service.start("ahe", AHE_PLAN, cfg.model_dump(mode="json"))
    if mask.bad_count == 0:
        for name in AHE_PLAN:
            run_service.skip(run_id, name)
        run_service.finish(run_id)
        return AheResult(f, {}, run_id)

    with run_service.step(run_id, "simple-average"):
        g = simple_average_fill(f, mask)
    with run_service.step(run_id, "strong-smoothing"):
        h = _smooth(g, cfg.step2, cfg.step2_time, cfg)
        # the synthesis divides by h
        h = PeriodicImage(np.maximum(h.values, GRAY_STEP))
    with run_service.step(run_id, "advanced-average"):
        f3 = advanced_average_fill(f, mask, h)
    with run_service.step(run_id, "weak-smoothing"):
        out = _smooth(f3, cfg.step4, cfg.step4_time, cfg)

    intermediates: Dict[str, PeriodicImage] = {}
    if cfg.emit_intermediates:
        intermediates = {
            "averaged": g,
            "gradient": PeriodicImage.clipped(gradient_magnitude(g)),
            "smoothed": h,
            "synthesized": f3,
        }
        for key, img in intermediates.items():
            run_service.record(run_id, key, img)
    run_service.finish(run_id)
    logger.info("ahe finished in {:.2f}s", run_service.total_seconds(run_id))
    return AheResult(out, intermediates, run_id)


class PipelineOptions(BaseModel):
    """Keys shared by the plain and varying-coefficient pipelines; strings from config files are coerced."""

    model_config = ConfigDict(frozen=True, extra="ignore")

    layers: int = Field(default=30, ge=2)
    final_time: float = Field(default=1.0, gt=0)
    substeps: int = Field(default=20, ge=1)
    cn_steps: int = Field(default=5, ge=1)
    scale_by_size: bool = True
    a: float = Field(default=1.0, ge=0)
    b: float = Field(default=0.05, ge=0)
    lift: LiftMode = LiftMode.GRADIENT
    smoothing_radius: Optional[float] = Field(default=PLAIN_SMOOTHING_RADIUS, ge=0)
    steps: Optional[int] = Field(default=None, ge=1)
    # "none" disables restoration for the plain pipeline
    mode: str = RestoreMode.DYNAMIC.value
    iterations: int = Field(default=50, ge=1)
    epsilon: float = Field(default=0.1, ge=0)
    progress: bool = False

    def restore(self) -> Optional[RestoreParams]:
        if self.mode.lower() == "none":
            return None
        return RestoreParams(iterations=self.iterations, epsilon=self.epsilon, mode=self.mode.lower())


def reconstruct(
    method: str, f: PeriodicImage, mask: CorruptionMask, params: Mapping[str, Any]
) -> Tuple[PeriodicImage, Dict[str, PeriodicImage]]:
    """Run ``method`` with flat ``params``; returns the image and any intermediates."""
    opts = PipelineOptions.model_validate(dict(params))
    if method == "average":
        return simple_average_fill(f, mask), {}
    if method == "median":
        return median_filter(f, mask), {}
    if method == "plain":
        out = run_plain(
            f,
            mask,
            a=opts.a,
            b=opts.b,
            n=opts.layers,
            lift_mode=opts.lift,
            restore=opts.restore(),
            t=opts.final_time,
            steps=opts.steps,
            smoothing_radius=opts.smoothing_radius,
            scale_by_size=opts.scale_by_size,
            progress=opts.progress,
        )
        return out, {}
    if method == "varcoef-dr":
        p = CoefficientParams(**{key: params.get(key, value) for key, value in DR_DEFAULTS.model_dump().items()})
        out = run_varcoef_dr(
            f,
            mask,
            p,
            opts.restore() or RestoreParams(),
            n=opts.layers,
            t=opts.final_time,
            substeps=opts.substeps,
            cn_steps=opts.cn_steps,
            scale_by_size=opts.scale_by_size,
            progress=opts.progress,
        )
        return out, {}
    if method == "ahe":
        result = run_ahe(f, mask, AheConfig.from_params(params))
        return result.image, result.intermediates
    raise InvalidInputError(f"unknown method {method!r}")


def _demo_params(name: str, params: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    merged = load_preset(name if name in preset_names() else None)
    merged.update(params or {})
    return merged


def demo_panels(
    name: str, img: PeriodicImage, mask: CorruptionMask, params: Optional[Mapping[str, Any]] = None
) -> Dict[str, PeriodicImage]:
    """Ordered panels of one of the demonstration experiments.

    ``final-times`` diffuses with the gradient lift at two final times,
    ``anisotropy`` compares the trivial lift with two constant-angle lifts,
    ``orientation`` keeps only orientation information and ``mosaic`` sets
    simple averaging against the median filter.
    """
    if name not in DEMOS:
        raise InvalidInputError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    p = _demo_params(name, params)
    opts = PipelineOptions.model_validate(p)
    n, a, b, t = opts.layers, opts.a, opts.b, opts.final_time
    radius, scale = opts.smoothing_radius, opts.scale_by_size
    panels: Dict[str, PeriodicImage] = {"input": img}

    if name == "final-times":
        for ti in p.get("final_times", [0.5, 2.0]):
            panels[f"t{float(ti):g}"] = run_plain(
                img, mask, a, b, n, LiftMode.GRADIENT, t=float(ti), smoothing_radius=radius, scale_by_size=scale
            )
    elif name == "anisotropy":
        img = gaussian_smooth(img, float(radius or 0.0))
        panels["trivial"] = _single_pass(img, lambda x: lift_trivial(x, n), a, b, t, None, scale)
        angles: Sequence[float] = p.get("angles", [np.pi / 4, 3 * np.pi / 4])
        for theta in angles:
            lift = lambda x, theta=float(theta): lift_constant_angle(x, n, theta)
            panels[f"theta{np.degrees(theta):.0f}"] = _single_pass(img, lift, a, b, t, None, scale)
    elif name == "orientation":
        level = float(p.get("level", 0.5))
        smoothed = gaussian_smooth(img, float(radius or 0.0))
        stack = evolve_const(lift_orientation_only(smoothed, n, level), a, b, t, None, scale)
        projected = project_max(stack)
        panels["orientation"] = projected if projected.max() == 0 else renormalize(projected, min(1.0, level))
    else:
        panels["average"] = simple_average_fill(img, mask)
        panels["median"] = median_filter(img, mask)
    return panels
