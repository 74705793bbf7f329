"""Reference Schrödinger treatment of the dipole pulse, with time a parameter rather than a coordinate.

The pulse potential ``V = -p (E0 + E1 T)`` is uniform across the beam, so it separates off
as a global, p-dependent phase ``-integral V dT`` while the spatial packet evolves freely.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .dipole import ImpulsiveField
from .errors import DomainError
from .kernels import GaussianPacket4D, gaussian_factor

FieldSpec = Union[ImpulsiveField, Tuple[float, float, float, float]]


@dataclass(frozen=True)
class XPacket:
    """One-dimensional Gaussian ``phi(x)`` with free-evolution chirp ``zeta``."""

    x_a: float
    k_a: float
    sigma_x: float
    zeta: float = 0.0
    amplitude_scale: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise DomainError("sigma_x must be positive")

    @classmethod
    def from_packet(cls, packet: GaussianPacket4D) -> "XPacket":
        return cls(packet.x_a, packet.k_a, packet.sigma_x, packet.zeta_x)

    def wave(self, x):
        return self.amplitude_scale * gaussian_factor(x, self.x_a, self.k_a, self.sigma_x, self.zeta)

    @property
    def center(self) -> float:
        return self.x_a + self.k_a * self.zeta

    @property
    def norm(self) -> float:
        return float(abs(self.amplitude_scale) ** 2)


@dataclass(frozen=True)
class SchrodingerComponent:
    p: float
    phase_shift: float
    packet_x: XPacket
    delta_omega: float
    spectator: GaussianPacket4D = None  # full packet, time factor untouched by the pulse


def _as_impulsive(field: FieldSpec) -> ImpulsiveField:
    if isinstance(field, ImpulsiveField):
        return field
    E0, E1, T1, T2 = field
    return ImpulsiveField.from_field(E0, E1, T1, T2)


def schrodinger_precession(p: float, field: FieldSpec) -> float:
    """Change of the component's frequency across the pulse: ``-(p E0_bar + p E1_bar T_bar)``."""
    imp = _as_impulsive(field)
    return -(p * imp.E0_bar + p * imp.E1_bar * imp.T_bar)


def schrodinger_evolve(packet_x, p: float, field: FieldSpec, m: float, T0: float, T3: float) -> SchrodingerComponent:
    """Free spatial evolution plus the pulse phase ``p (E0_bar + E1_bar T_bar)``.

    ``packet_x`` may be an ``XPacket`` or a ``GaussianPacket4D``; in the latter case the
    time factor is carried along unchanged (freely evolved, no kick) as ``spectator``.
    """
    imp = _as_impulsive(field)
    if not T3 > T0:
        raise DomainError("need T3 > T0")
    if imp.delta_T > 0 and not (T0 <= imp.T1 and imp.T2 <= T3):
        raise DomainError("need T0 <= T1 <= T2 <= T3")
    if imp.delta_T == 0 and not (T0 <= imp.T_bar <= T3):
        raise DomainError("pulse center outside [T0, T3]")
    shift = p * imp.E0_bar + p * imp.E1_bar * imp.T_bar
    phase = np.exp(1j * shift)
    spectator = None
    if isinstance(packet_x, GaussianPacket4D):
        dT = T3 - T0
        spectator = dataclasses.replace(
            packet_x,
            zeta_t=packet_x.zeta_t - dT / m,
            zeta_x=packet_x.zeta_x + dT / m,
            amplitude_scale=packet_x.amplitude_scale * phase,
        )
        xp = XPacket.from_packet(packet_x)
    else:
        xp = packet_x
    out = dataclasses.replace(xp, zeta=xp.zeta + (T3 - T0) / m, amplitude_scale=xp.amplitude_scale * phase)
    return SchrodingerComponent(p, shift, out, schrodinger_precession(p, imp), spectator)


def split_step_phase(
    packet_x: XPacket,
    p: float,
    field: FieldSpec,
    m: float,
    T0: float,
    T3: float,
    x: np.ndarray,
    n_steps: int = 400,
) -> Tuple[np.ndarray, float]:
    """Fourier split-step integration of ``i dpsi/dT = -psi''/(2m) + V(T) psi`` on grid ``x``.

    The pulse enters through the lab-time dependent uniform potential ``-p (E0 + E1 T)``
    inside ``[T1, T2]``; steps are aligned so that the pulse occupies whole steps.
    Returns the final samples and the phase relative to the field-free run.
    """
    imp = _as_impulsive(field)
    if imp.delta_T <= 0:
        raise DomainError("split-step oracle needs a finite pulse")
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    k = 2 * np.pi * np.fft.fftfreq(x.size, dx)
    psi0 = packet_x.wave(x).astype(complex)

    def run(with_field):
        psi = psi0.copy()
        edges = [T0, imp.T1, imp.T2, T3]
        lengths = np.diff(edges)
        counts = np.maximum(1, np.round(n_steps * lengths / (T3 - T0)).astype(int))
        for (a, b), n in zip(zip(edges[:-1], edges[1:]), counts):
            if b <= a:
                continue
            h = (b - a) / n
            kin = np.exp(-0.5j * h * k**2 / m)
            inside = with_field and a >= imp.T1 and b <= imp.T2
            for j in range(n):
                if inside:
                    Tm = a + (j + 0.5) * h
                    V = -p * (imp.E0 + imp.E1 * Tm)
                    psi = psi * np.exp(-0.5j * h * V)
                    psi = np.fft.ifft(kin * np.fft.fft(psi))
                    psi = psi * np.exp(-0.5j * h * V)
                else:
                    psi = np.fft.ifft(kin * np.fft.fft(psi))
        return psi

    with_f = run(True)
    free = run(False)
    return with_f, float(np.angle(np.vdot(free, with_f)))
