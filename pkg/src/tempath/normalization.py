"""Per-packet kernel normalization: scale a kernel so the outgoing probability is one.

For a prepared packet ``phi`` the constant is

    N_phi = integral d t2 d x2 | integral d t1 d x1 K(t1, x1; t2, x2) phi(t1, x1) |^2

and the normalized kernel is ``K / sqrt(N_phi)``, with the scale taken real and positive.
Quadratures are trapezoid sums on a uniform ``Grid`` shared by the input and output sides.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid

from .errors import BoundaryLeak, DomainError, NonPositive
from .kernels import GaussianPacket4D, Grid

EDGE_FRACTION = 0.02
LEAK_TOL = 1e-10
ROW_CHUNK = 512


@dataclass(frozen=True)
class NormalizationResult:
    n_phi: float
    normalized_scale: complex
    residual: float


@dataclass(frozen=True)
class SeparableKernel:
    """Kernel ``time(t1, t2) * space(x1, x2)``; either factor may be None (identity on that axis)."""

    time: Optional[Callable] = None
    space: Optional[Callable] = None

    def __call__(self, t1, x1, t2, x2):
        out = 1.0 + 0.0j
        if self.time is not None:
            out = out * self.time(t1, t2)
        if self.space is not None:
            out = out * self.space(x1, x2)
        return out

    def scaled(self, c: complex) -> "SeparableKernel":
        t = self.time
        if t is None:
            raise DomainError("cannot scale a kernel without a time factor")
        return SeparableKernel(lambda a, b: c * t(a, b), self.space)


@dataclass
class SampledWave:
    """Wave function on ``grid``; separable waves keep their axis factors."""

    grid: Grid
    psi_t: Optional[np.ndarray] = None
    psi_x: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    scale: complex = 1.0

    @property
    def separable(self) -> bool:
        return self.values is None

    def full(self) -> np.ndarray:
        if self.values is not None:
            return self.scale * self.values
        return self.scale * np.outer(self.psi_t, self.psi_x)

    def marginal_t(self) -> np.ndarray:
        if self.separable:
            return abs(self.scale) ** 2 * np.abs(self.psi_t) ** 2 * trapezoid(np.abs(self.psi_x) ** 2, self.grid.x)
        return trapezoid(np.abs(self.full()) ** 2, self.grid.x, axis=1)

    def marginal_x(self) -> np.ndarray:
        if self.separable:
            return abs(self.scale) ** 2 * np.abs(self.psi_x) ** 2 * trapezoid(np.abs(self.psi_t) ** 2, self.grid.t)
        return trapezoid(np.abs(self.full()) ** 2, self.grid.t, axis=0)

    def norm(self) -> float:
        return float(trapezoid(self.marginal_t(), self.grid.t))


def _trapz_weights(y: np.ndarray) -> np.ndarray:
    w = np.full(y.size, y[1] - y[0])
    w[0] = w[-1] = 0.5 * (y[1] - y[0])
    return w


def _apply_1d(kernel_1d: Optional[Callable], y: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``out(y2) = sum_y1 w(y1) K(y1, y2) f(y1)`` in row chunks."""
    if kernel_1d is None:
        return f.astype(complex)
    wf = _trapz_weights(y) * f
    out = np.empty(y.size, dtype=complex)
    for lo in range(0, y.size, ROW_CHUNK):
        y2 = y[lo : lo + ROW_CHUNK]
        out[lo : lo + ROW_CHUNK] = kernel_1d(y[None, :], y2[:, None]) @ wf
    return out


def _check_edges(rho: np.ndarray, what: str):
    k = max(1, int(EDGE_FRACTION * rho.size))
    total = float(np.sum(rho))
    if total <= 0:
        return
    frac = float(np.sum(rho[:k]) + np.sum(rho[-k:])) / total
    if frac > LEAK_TOL:
        raise BoundaryLeak(f"{what}: {frac:.3g} of the probability in the outer grid edges")


def _evolve_raw(kernel, packet: GaussianPacket4D, grid: Grid) -> SampledWave:
    t, x = grid.t, grid.x
    phi_t = packet.time_factor(t)
    phi_x = packet.space_factor(x)
    _check_edges(np.abs(phi_t) ** 2, "prepared packet (t)")
    _check_edges(np.abs(phi_x) ** 2, "prepared packet (x)")
    if isinstance(kernel, SeparableKernel):
        wave = SampledWave(
            grid,
            _apply_1d(kernel.time, t, phi_t),
            _apply_1d(kernel.space, x, phi_x),
            scale=packet.amplitude_scale,
        )
        _check_edges(np.abs(wave.psi_t) ** 2, "evolved wave (t)")
        _check_edges(np.abs(wave.psi_x) ** 2, "evolved wave (x)")
        return wave
    # generic kernel: direct nested quadrature, O((n_t n_x)^2); intended for small grids
    W = np.outer(_trapz_weights(t), _trapz_weights(x)) * np.outer(phi_t, phi_x)
    out = np.empty((t.size, x.size), dtype=complex)
    T1, X1 = np.meshgrid(t, x, indexing="ij")
    for i, t2 in enumerate(t):
        for j, x2 in enumerate(x):
            out[i, j] = np.sum(kernel(T1, X1, t2, x2) * W)
    wave = SampledWave(grid, values=out, scale=packet.amplitude_scale)
    _check_edges(wave.marginal_t(), "evolved wave (t)")
    _check_edges(wave.marginal_x(), "evolved wave (x)")
    return wave


def _result_from_wave(wave: SampledWave) -> NormalizationResult:
    n_phi = wave.norm()
    if not n_phi > 0 or not np.isfinite(n_phi):
        raise NonPositive(f"N_phi = {n_phi!r}: the kernel is broken")
    scale = 1.0 / np.sqrt(n_phi)
    residual = abs(n_phi * scale**2 - 1.0)
    return NormalizationResult(float(n_phi), complex(scale), float(residual))


def normalization_constant(kernel, packet: GaussianPacket4D, T1: float, T2: float, grid: Grid) -> NormalizationResult:
    """Compute ``N_phi`` for ``kernel`` acting on ``packet`` between lab times ``T1`` and ``T2``.

    ``kernel`` is a ``SeparableKernel`` or any callable ``K(t1, x1, t2, x2)`` that broadcasts;
    the lab times are carried by the kernel itself and checked only for ordering.
    """
    if not T2 > T1:
        raise DomainError("need T2 > T1")
    return _result_from_wave(_evolve_raw(kernel, packet, grid))


def normalized_evolve(kernel, packet: GaussianPacket4D, T1: float, T2: float, grid: Grid) -> SampledWave:
    """Apply ``kernel`` to ``packet`` and rescale so the outgoing norm is one."""
    if not T2 > T1:
        raise DomainError("need T2 > T1")
    wave = _evolve_raw(kernel, packet, grid)
    res = _result_from_wave(wave)
    wave.scale = wave.scale * res.normalized_scale
    return wave
