"""
Spectral evolution
==================

Constant-coefficient hypoelliptic evolution of an orientation stack,
solved on the Fourier side.

Every orientation layer is transformed with a 2-D DFT. Frequency
``(k, l)`` then only couples the ``N`` orientation amplitudes of that
frequency, through the real ``N × N`` generator::

    L_kl = ½ (a Λ_N − b M diag_p (a^p_kl)²)
    a^p_kl = cos θ_p sin(2π k/M) + sin θ_p sin(2π l/M)     (k, l from 0)

with ``Λ_N`` the cyclic second difference over the orientation index
(again with a factor ½). Each block is advanced by Crank–Nicolson,
optionally with a source term held constant over the step::

    (I − dt/2 L) Ψ_new = (I + dt/2 L) Ψ_old + dt d

:func:`cn_step` is the literal per-step solve. Longer evolutions go
through :class:`BlockPropagator`, which factors the step once, shares it
between frequencies whose generators coincide and applies the resulting
propagator in parallel chunks. :func:`exact_evolution` is the dense
matrix-exponential reference used to check both.

The factor ``M`` in front of ``b`` can be switched off with
``scale_by_size=False``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from loguru import logger
from scipy.linalg import expm

from ..config import settings
from ..errors import InvalidInputError, NumericalError
from .grid import OrientationStack, layer_angles

# Generators whose squared symbols agree to this many decimals share one propagator.
_KEY_DECIMALS = 12


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Fourier-side amplitudes, ``blocks[k, l]`` is the N-vector of frequency (k, l)."""

    blocks: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.blocks, dtype=np.complex128)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
            raise InvalidInputError(f"spectral state must have shape M×M×N, got {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    @property
    def size(self) -> int:
        return self.blocks.shape[0]

    @property
    def layers(self) -> int:
        return self.blocks.shape[2]


@dataclass(frozen=True, eq=False)
class FrequencySymbol:
    """``coefficients[k, l, p]`` is a^p for frequency indices k, l (0-based)."""

    coefficients: np.ndarray

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]

    @property
    def layers(self) -> int:
        return self.coefficients.shape[2]


def to_spectral(stack: OrientationStack) -> SpectralState:
    return SpectralState(np.fft.fft2(stack.values, axes=(0, 1)))


def to_spatial(state: SpectralState) -> OrientationStack:
    return OrientationStack(np.fft.ifft2(state.blocks, axes=(0, 1)).real)


def symbol(m: int, n: int) -> FrequencySymbol:
    if m < 2 or n < 1:
        raise InvalidInputError(f"symbol needs M ≥ 2 and N ≥ 1, got M={m}, N={n}")
    theta = layer_angles(n)
    s = np.sin(2.0 * np.pi * np.arange(m) / m)
    coeffs = np.cos(theta)[None, None, :] * s[:, None, None] + np.sin(theta)[None, None, :] * s[None, :, None]
    coeffs.setflags(write=False)
    return FrequencySymbol(coeffs)


def orientation_laplacian(n: int) -> np.ndarray:
    """Cyclic ½-scaled second difference over ``n`` orientation layers."""
    shift = np.roll(np.eye(n), 1, axis=1)
    return 0.5 * (shift + shift.T - 2.0 * np.eye(n))


def _generator_rows(a2: np.ndarray, a: float, b_eff: float) -> np.ndarray:
    """Generators for a batch of squared-symbol rows ``a2`` of shape (B, N)."""
    n = a2.shape[-1]
    gens = np.broadcast_to(0.5 * a * orientation_laplacian(n), a2.shape[:-1] + (n, n)).copy()
    diag = np.arange(n)
    gens[..., diag, diag] -= 0.5 * b_eff * a2
    return gens


def _b_eff(b: float, m: int, scale_by_size: bool) -> float:
    return b * m if scale_by_size else b


def generator(sym: FrequencySymbol, a: float, b: float, scale_by_size: bool = True) -> np.ndarray:
    """All ``M × M`` blocks ``L_kl`` as an array of shape (M, M, N, N)."""
    return _generator_rows(sym.coefficients ** 2, a, _b_eff(b, sym.size, scale_by_size))


def _check_coefficients(a: float, b: float) -> None:
    if a < 0 or b < 0:
        raise InvalidInputError(f"diffusion coefficients must be non-negative, got a={a}, b={b}")


def _check_shapes(state: SpectralState, sym: FrequencySymbol, source: Optional[SpectralState]) -> None:
    if state.blocks.shape != sym.coefficients.shape:
        raise InvalidInputError(f"state {state.blocks.shape} does not match symbol {sym.coefficients.shape}")
    if source is not None and source.blocks.shape != state.blocks.shape:
        raise InvalidInputError(f"source {source.blocks.shape} does not match state {state.blocks.shape}")


def cn_step(
    state: SpectralState,
    sym: FrequencySymbol,
    a: float,
    b: float,
    dt: float,
    source: Optional[SpectralState] = None,
    scale_by_size: bool = True,
) -> SpectralState:
    """One Crank–Nicolson step of every frequency block."""
    if dt <= 0:
        raise InvalidInputError(f"time step must be positive, got {dt}")
    _check_coefficients(a, b)
    _check_shapes(state, sym, source)
    m, n = state.size, state.layers
    a2 = (sym.coefficients ** 2).reshape(-1, n)
    psi = state.blocks.reshape(-1, n)
    src = None if source is None else source.blocks.reshape(-1, n)
    out = np.empty_like(psi)
    ident = np.eye(n)
    rows = max(1, settings.chunk_groups)
    b_eff = _b_eff(b, m, scale_by_size)
    for start in range(0, psi.shape[0], rows):
        sl = slice(start, start + rows)
        gens = _generator_rows(a2[sl], a, b_eff)
        lhs = ident - 0.5 * dt * gens
        rhs = np.einsum("bij,bj->bi", ident + 0.5 * dt * gens, psi[sl])
        if src is not None:
            rhs = rhs + dt * src[sl]
        try:
            out[sl] = np.linalg.solve(lhs.astype(np.complex128), rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"Crank–Nicolson solve failed: {e}") from e
    if not np.all(np.isfinite(out)):
        raise NumericalError("Crank–Nicolson step produced non-finite amplitudes")
    return SpectralState(out.reshape(m, m, n))


def exact_evolution(
    state: SpectralState,
    sym: FrequencySymbol,
    a: float,
    b: float,
    t: float,
    source: Optional[SpectralState] = None,
    scale_by_size: bool = True,
) -> SpectralState:
    """Blockwise ``exp(tL)`` reference, with a constant source through the augmented exponential."""
    _check_coefficients(a, b)
    _check_shapes(state, sym, source)
    m, n = state.size, state.layers
    gens = generator(sym, a, b, scale_by_size).reshape(-1, n, n)
    psi = state.blocks.reshape(-1, n)
    if source is None:
        prop = expm(t * gens)
        out = np.einsum("bij,bj->bi", prop, psi)
        return SpectralState(out.reshape(m, m, n))
    aug = np.zeros((gens.shape[0], 2 * n, 2 * n))
    aug[:, :n, :n] = t * gens
    aug[:, :n, n:] = t * np.eye(n)
    big = expm(aug)
    out = np.einsum("bij,bj->bi", big[:, :n, :n], psi)
    out += np.einsum("bij,bj->bi", big[:, :n, n:], source.blocks.reshape(-1, n))
    return SpectralState(out.reshape(m, m, n))


class BlockPropagator:
    """Crank–Nicolson over ``micro_steps`` steps of length ``dt``, precomputed per frequency.

    Advancing a state applies ``Ψ ← R Ψ + S d`` to every block, with
    ``R = P^c``, ``S = (I + P + … + P^(c−1)) Q``, ``P`` the one-step
    propagator and ``Q = dt (I − dt/2 L)^{-1}``. Frequencies sharing a
    generator share ``R`` and ``S``; the symbol's symmetries make that
    roughly one block in eight.
    """

    def __init__(
        self,
        m: int,
        n: int,
        a: float,
        b: float,
        dt: float,
        micro_steps: int = 1,
        scale_by_size: bool = True,
        with_source: bool = False,
    ) -> None:
        if dt <= 0 or micro_steps < 1:
            raise InvalidInputError(f"need dt > 0 and micro_steps ≥ 1, got dt={dt}, micro_steps={micro_steps}")
        _check_coefficients(a, b)
        self.m, self.n = m, n
        self.with_source = with_source

        a2 = (symbol(m, n).coefficients ** 2).reshape(-1, n)
        _, first, inverse = np.unique(np.round(a2, _KEY_DECIMALS), axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        gens = _generator_rows(a2[first], a, _b_eff(b, m, scale_by_size))

        ident = np.broadcast_to(np.eye(n), gens.shape)
        lhs = ident - 0.5 * dt * gens
        try:
            step = np.linalg.solve(lhs, ident + 0.5 * dt * gens)
            self._advance = np.linalg.matrix_power(step, micro_steps)
            self._inject = None
            if with_source:
                q = np.linalg.solve(lhs, dt * ident)
                acc = q
                for _ in range(micro_steps - 1):
                    acc = step @ acc + q
                self._inject = acc
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"cannot factor Crank–Nicolson step: {e}") from e

        # groups[g] lists the flat frequency indices using generator g, padded
        # with the index of an extra all-zero row
        total = inverse.shape[0]
        order = np.argsort(inverse, kind="stable")
        counts = np.bincount(inverse, minlength=len(first))
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        slot = np.arange(total) - np.repeat(starts, counts)
        self._groups = np.full((len(first), counts.max()), total, dtype=np.int64)
        self._groups[inverse[order], slot] = order
        logger.debug(
            "built propagator M={} N={} a={} b={} dt={} steps={} ({} distinct blocks)",
            m, n, a, b, dt, micro_steps, len(first),
        )

    def _apply_chunk(self, sl: slice, psi: np.ndarray, src: Optional[np.ndarray], out: np.ndarray) -> None:
        idx = self._groups[sl]
        vec = psi[idx].transpose(0, 2, 1)
        res = self._advance[sl] @ vec.real + 1j * (self._advance[sl] @ vec.imag)
        if src is not None:
            svec = src[idx].transpose(0, 2, 1)
            res += self._inject[sl] @ svec.real + 1j * (self._inject[sl] @ svec.imag)
        valid = idx < out.shape[0]
        out[idx[valid]] = res.transpose(0, 2, 1)[valid]

    def apply(self, state: SpectralState, source: Optional[SpectralState] = None) -> SpectralState:
        if state.size != self.m or state.layers != self.n:
            raise InvalidInputError(f"propagator built for M={self.m}, N={self.n}, got {state.blocks.shape}")
        if source is not None and not self.with_source:
            raise InvalidInputError("propagator was built without a source term")
        pad = np.zeros((1, self.n), dtype=np.complex128)
        psi = np.concatenate([state.blocks.reshape(-1, self.n), pad])
        src = None if source is None else np.concatenate([source.blocks.reshape(-1, self.n), pad])
        out = np.empty((psi.shape[0] - 1, self.n), dtype=np.complex128)

        chunk = max(1, settings.chunk_groups)
        slices = [slice(s, s + chunk) for s in range(0, self._groups.shape[0], chunk)]
        workers = min(settings.threads, len(slices))
        if workers <= 1:
            for sl in slices:
                self._apply_chunk(sl, psi, src, out)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda sl: self._apply_chunk(sl, psi, src, out), slices))
        if not np.all(np.isfinite(out)):
            raise NumericalError("propagation produced non-finite amplitudes")
        return SpectralState(out.reshape(self.m, self.m, self.n))


@lru_cache(maxsize=4)
def get_propagator(
    m: int,
    n: int,
    a: float,
    b: float,
    dt: float,
    micro_steps: int,
    scale_by_size: bool = True,
    with_source: bool = False,
) -> BlockPropagator:
    return BlockPropagator(m, n, a, b, dt, micro_steps, scale_by_size, with_source)


def default_steps(a: float, b: float, m: int, t: float) -> int:
    """Smallest step count with ``dt ≤ 0.01 · min(1/a, 1/(bM))``."""
    rates = [r for r in (a, b * m) if r > 0]
    if not rates:
        return 1
    dt_max = 0.01 / max(rates)
    return max(1, math.ceil(t / dt_max - 1e-9))


def evolve_spectral(
    state: SpectralState,
    a: float,
    b: float,
    t: float,
    steps: Optional[int] = None,
    scale_by_size: bool = True,
) -> SpectralState:
    """Unclamped Crank–Nicolson evolution of a Fourier-side state up to time ``t``."""
    if t <= 0:
        raise InvalidInputError(f"final time must be positive, got {t}")
    _check_coefficients(a, b)
    steps = default_steps(a, b, state.size, t) if steps is None else steps
    if steps < 1:
        raise InvalidInputError(f"steps must be at least 1, got {steps}")
    if a == 0 and b == 0:
        return state
    prop = get_propagator(state.size, state.layers, float(a), float(b), t / steps, int(steps), scale_by_size)
    return prop.apply(state)


def evolve_const(
    stack: OrientationStack,
    a: float,
    b: float,
    t: float,
    steps: Optional[int] = None,
    scale_by_size: bool = True,
) -> OrientationStack:
    """Evolve a stack to time ``t``; negative values are clamped to 0 only at the end."""
    logger.debug("evolve_const a={} b={} T={} steps={}", a, b, t, steps)
    state = evolve_spectral(to_spectral(stack), a, b, t, steps, scale_by_size)
    return OrientationStack(np.maximum(to_spatial(state).values, 0.0))
