"""Closed-form free kernels and Gaussian packets in one time and one space dimension.

Conventions (natural units, hbar = c = 1):

* The time piece of the free kernel carries the exponent ``-i m dt^2 / (2 dT)``,
  the space piece ``+i m dx^2 / (2 dT)``.
* ``sqrt(-i)`` is fixed to ``exp(-i pi/4)``, so the time prefactor is
  ``exp(+i pi/4) sqrt(m / (2 pi dT))`` and the space prefactor is its conjugate.
* A fresh packet factor is ``(pi s^2)^(-1/4) exp(-(y - y_a)^2 / (2 s^2) + i kappa (y - y_a))``
  with ``kappa = k_a`` in space and ``kappa = -omega_a`` in time.

Freely evolved packets stay Gaussian. Their complex width is ``W = s^2 + i zeta``
where ``zeta`` accumulates ``+dT/m`` in space and ``-dT/m`` in time.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import erfc

from .errors import DomainError, NonConvergent

#: Branch of sqrt(-i) used by every prefactor in the package.
SQRT_MINUS_I = np.exp(-0.25j * np.pi)

TIME_SIGN = -1
SPACE_SIGN = +1

Amplitude = complex


@dataclass(frozen=True)
class Event:
    """A point (t, x) in the particle's 1+1 dimensional coordinates."""

    t: float
    x: float


@dataclass(frozen=True)
class GaussianPacket4D:
    """Product Gaussian ``phi(t, x) = phi_t(t) phi_x(x)`` with optional free-evolution chirp.

    ``zeta_t`` and ``zeta_x`` are zero for a fresh packet. ``amplitude_scale`` multiplies
    the whole wave function; a value of 1 gives unit norm.
    """

    t_a: float
    x_a: float
    omega_a: float
    k_a: float
    sigma_t: float
    sigma_x: float
    amplitude_scale: complex = 1.0 + 0.0j
    zeta_t: float = 0.0
    zeta_x: float = 0.0

    def __post_init__(self):
        if not (self.sigma_t > 0 and self.sigma_x > 0):
            raise DomainError("packet widths must be positive")

    # complex widths
    @property
    def width2_t(self) -> complex:
        return self.sigma_t**2 + 1j * self.zeta_t

    @property
    def width2_x(self) -> complex:
        return self.sigma_x**2 + 1j * self.zeta_x

    @property
    def center_t(self) -> float:
        """Center of the time density."""
        return self.t_a - self.omega_a * self.zeta_t

    @property
    def center_x(self) -> float:
        return self.x_a + self.k_a * self.zeta_x

    @property
    def width_t(self) -> float:
        """Current density width, same convention as ``sigma_t`` (variance = width^2 / 2)."""
        return float(np.sqrt(self.sigma_t**2 + self.zeta_t**2 / self.sigma_t**2))

    @property
    def width_x(self) -> float:
        return float(np.sqrt(self.sigma_x**2 + self.zeta_x**2 / self.sigma_x**2))

    @property
    def norm(self) -> float:
        return float(abs(self.amplitude_scale) ** 2)

    def time_factor(self, t):
        """Unit-norm time factor (the amplitude scale is not included)."""
        return gaussian_factor(t, self.t_a, -self.omega_a, self.sigma_t, self.zeta_t)

    def space_factor(self, x):
        return gaussian_factor(x, self.x_a, self.k_a, self.sigma_x, self.zeta_x)

    def wave(self, t, x):
        t = np.asarray(t)
        x = np.asarray(x)
        return self.amplitude_scale * self.time_factor(t) * self.space_factor(x)

    def kick_t(self, beta: float) -> "GaussianPacket4D":
        """Multiply the wave function by ``exp(i beta t)``; the result stays in closed form."""
        t_a, kappa, phase = _kick(self.t_a, -self.omega_a, self.zeta_t, beta)
        return dataclasses.replace(
            self, t_a=t_a, omega_a=-kappa, amplitude_scale=self.amplitude_scale * np.exp(1j * phase)
        )

    def kick_x(self, beta: float) -> "GaussianPacket4D":
        """Multiply the wave function by ``exp(i beta x)``."""
        x_a, kappa, phase = _kick(self.x_a, self.k_a, self.zeta_x, beta)
        return dataclasses.replace(
            self, x_a=x_a, k_a=kappa, amplitude_scale=self.amplitude_scale * np.exp(1j * phase)
        )

    def scaled(self, c: complex) -> "GaussianPacket4D":
        return dataclasses.replace(self, amplitude_scale=self.amplitude_scale * c)


@dataclass(frozen=True)
class Moments:
    mean_t: float
    mean_x: float
    var_t: float
    var_x: float
    lab_time: float
    norm: float


def gaussian_factor(y, y_a: float, kappa: float, sigma: float, zeta: float = 0.0):
    """One-dimensional unit-norm Gaussian of complex width ``sigma^2 + i zeta``."""
    y = np.asarray(y, dtype=float)
    w2 = sigma**2 + 1j * zeta
    pref = (np.pi * sigma**2) ** -0.25 * np.sqrt(sigma**2 / w2)
    c = y_a + kappa * zeta
    return pref * np.exp(
        -((y - c) ** 2) / (2 * w2) + 1j * kappa * (y - y_a) - 0.5j * kappa**2 * zeta
    )


def _kick(y_a, kappa, zeta, beta):
    new_kappa = kappa + beta
    new_y_a = y_a - beta * zeta
    phase = (
        -kappa * y_a
        - 0.5 * kappa**2 * zeta
        + new_kappa * new_y_a
        + 0.5 * new_kappa**2 * zeta
    )
    return new_y_a, new_kappa, phase


def _check_interval(T1, T2):
    if not T2 > T1:
        raise DomainError(f"lab times must satisfy T2 > T1, got T1={T1}, T2={T2}")
    return T2 - T1


def kernel_prefactor(m: float, dT: float, sign: int) -> complex:
    """``sqrt(m / (2 pi i sign dT))`` on the package branch."""
    mod = np.sqrt(m / (2 * np.pi * dT))
    # 1/sqrt(i) = sqrt(-i); 1/sqrt(-i) = conj(sqrt(-i))
    return mod * (SQRT_MINUS_I if sign > 0 else np.conj(SQRT_MINUS_I))


def free_time_kernel(m: float, T1: float, T2: float, t1, t2):
    """Time piece ``sqrt(m / (-2 pi i dT)) exp(-i m (t2 - t1)^2 / (2 dT))``."""
    dT = _check_interval(T1, T2)
    dt = np.asarray(t2) - np.asarray(t1)
    return kernel_prefactor(m, dT, TIME_SIGN) * np.exp(-0.5j * m * dt**2 / dT)


def free_space_kernel(m: float, T1: float, T2: float, x1, x2):
    """Space piece ``sqrt(m / (2 pi i dT)) exp(+i m (x2 - x1)^2 / (2 dT))``."""
    dT = _check_interval(T1, T2)
    dx = np.asarray(x2) - np.asarray(x1)
    return kernel_prefactor(m, dT, SPACE_SIGN) * np.exp(0.5j * m * dx**2 / dT)


def free_kernel_4d(m: float, T1: float, T2: float, e1: Event, e2: Event):
    """Product of the time and space pieces, from ``e1`` at ``T1`` to ``e2`` at ``T2``."""
    return free_time_kernel(m, T1, T2, e1.t, e2.t) * free_space_kernel(m, T1, T2, e1.x, e2.x)


def free_action(m: float, T1: float, T2: float, e1: Event, e2: Event) -> float:
    """Classical action of the straight line between two events."""
    dT = _check_interval(T1, T2)
    return -0.5 * m * (e2.t - e1.t) ** 2 / dT + 0.5 * m * (e2.x - e1.x) ** 2 / dT


def evolve_gaussian_free(packet: GaussianPacket4D, m: float, T1: float, T2: float) -> GaussianPacket4D:
    """Apply the free 4D kernel from ``T1`` to ``T2`` in closed form."""
    dT = _check_interval(T1, T2)
    return dataclasses.replace(
        packet, zeta_t=packet.zeta_t - dT / m, zeta_x=packet.zeta_x + dT / m
    )


def packet_probability_density(packet: GaussianPacket4D, t, x):
    return np.abs(packet.wave(t, x)) ** 2


def _axis_moments(center: float, width: float, density, n: int, half_window: float = 10.0):
    lo, hi = center - half_window * width, center + half_window * width
    # density ~ exp(-(y-c)^2 / width^2); mass outside +-w*width is erfc(w)
    tail = erfc(half_window)
    if tail > 1e-10:
        raise NonConvergent(f"tail mass {tail:.3g} outside the moment window")
    y = np.linspace(lo, hi, n)
    rho = density(y)
    mass = trapezoid(rho, y)
    mean = trapezoid(y * rho, y) / mass
    var = trapezoid((y - mean) ** 2 * rho, y) / mass
    return mass, mean, var


def packet_moments(packet: GaussianPacket4D, n: int = 4096, half_window: float = 10.0) -> Moments:
    """Moments of ``|phi|^2`` by trapezoid quadrature over +-``half_window`` widths per axis."""
    if n < 4096:
        raise DomainError("moment quadrature needs at least 4096 points per axis")
    mt, mean_t, var_t = _axis_moments(
        packet.center_t, packet.width_t, lambda t: np.abs(packet.time_factor(t)) ** 2, n, half_window
    )
    mx, mean_x, var_x = _axis_moments(
        packet.center_x, packet.width_x, lambda x: np.abs(packet.space_factor(x)) ** 2, n, half_window
    )
    norm = packet.norm * mt * mx
    return Moments(mean_t, mean_x, max(var_t, 0.0), max(var_x, 0.0), mean_t, norm)


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid in (t, x)."""

    t_min: float
    t_max: float
    n_t: int
    x_min: float
    x_max: float
    n_x: int

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_t)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / (self.n_t - 1)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @classmethod
    def covering(cls, packets, n_t: int = 4096, n_x: int = 4096, half_window: float = 10.0) -> "Grid":
        """Smallest grid holding +-``half_window`` widths of every packet."""
        t_lo = min(p.center_t - half_window * p.width_t for p in packets)
        t_hi = max(p.center_t + half_window * p.width_t for p in packets)
        x_lo = min(p.center_x - half_window * p.width_x for p in packets)
        x_hi = max(p.center_x + half_window * p.width_x for p in packets)
        return cls(t_lo, t_hi, n_t, x_lo, x_hi, n_x)
