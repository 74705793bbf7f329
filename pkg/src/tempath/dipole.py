"""Electric dipole in a time-ramped field: the impulsive time kernel and per-component evolution."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DetectorWindow, DomainError
from .kernels import GaussianPacket4D, Grid, evolve_gaussian_free, free_time_kernel
from .lattice import LatticeConfig, PotentialSpec, trotter_propagate


@dataclass(frozen=True)
class ImpulsiveField:
    """Pulse of field ``E0 + E1 t`` lasting ``delta_T`` around ``T_bar``.

    Only the integrated strengths ``E0_bar = E0 * delta_T`` and ``E1_bar = E1 * delta_T``
    enter the impulsive formulas; ``delta_T`` is kept for finite-pulse lattice runs.
    """

    E0_bar: float
    E1_bar: float
    T_bar: float
    delta_T: float = 0.0

    def __post_init__(self):
        if self.delta_T < 0:
            raise DomainError("delta_T must be >= 0")

    @classmethod
    def from_field(cls, E0: float, E1: float, T1: float, T2: float) -> "ImpulsiveField":
        if T2 < T1:
            raise DomainError("pulse must satisfy T2 >= T1")
        dT = T2 - T1
        return cls(E0 * dT, E1 * dT, 0.5 * (T1 + T2), dT)

    @property
    def T1(self) -> float:
        return self.T_bar - 0.5 * self.delta_T

    @property
    def T2(self) -> float:
        return self.T_bar + 0.5 * self.delta_T

    @property
    def E0(self) -> float:
        if self.delta_T == 0:
            raise DomainError("field strength is undefined for an impulsive pulse")
        return self.E0_bar / self.delta_T

    @property
    def E1(self) -> float:
        if self.delta_T == 0:
            raise DomainError("field strength is undefined for an impulsive pulse")
        return self.E1_bar / self.delta_T

    def with_duration(self, delta_T: float) -> "ImpulsiveField":
        """Same integrated strengths and center, different duration."""
        return dataclasses.replace(self, delta_T=delta_T)


@dataclass(frozen=True)
class DipoleSpectrum:
    eigenvalues: tuple
    weights: tuple

    def __post_init__(self):
        p = np.asarray(self.eigenvalues, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if p.shape != w.shape or p.ndim != 1 or p.size == 0:
            raise DomainError("eigenvalues and weights must be equal-length 1D sequences")
        if np.any(w < 0) or w.sum() <= 0:
            raise DomainError("weights must be non-negative with positive sum")
        order = np.argsort(p, kind="stable")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in p[order]))
        object.__setattr__(self, "weights", tuple(float(v) for v in (w / w.sum())[order]))


@dataclass(frozen=True)
class EvolvedComponent:
    """One dipole eigencomponent after the pulse.

    ``delta_omega`` is the precession (phase change along the classical time path),
    ``omega_shift`` the shift of the time-frequency content, and ``delta_v`` the resulting
    change of ``d<t>/dT``. ``delta_v_omega_over_k`` converts ``omega_shift`` with ``v = omega / k``.
    """

    p: float
    delta_omega: float
    delta_v: float
    packet: GaussianPacket4D
    mean_arrival_t: float
    omega_shift: float
    omega_coefficient: float
    delta_v_omega_over_k: Optional[float]
    dropped_phase: float


def dipole_interaction_energy(p: float, E0: float, E1: float, t, tdot=1.0, inside: bool = True):
    """``-tdot p (E0 + E1 t)`` inside the pulse, zero outside."""
    if not inside:
        return np.zeros_like(np.asarray(t, dtype=float))
    return -np.asarray(tdot) * p * (E0 + E1 * np.asarray(t))


def _check_order(T0, T_bar, T3):
    if not (T0 < T_bar < T3):
        raise DomainError(f"need T0 < T_bar < T3, got {T0}, {T_bar}, {T3}")


def dipole_time_kernel(m: float, p: float, imp: ImpulsiveField, T0: float, T3: float, t0, t3):
    """Free time kernel times the impulsive dipole phases, second-order terms dropped."""
    _check_order(T0, imp.T_bar, T3)
    t0 = np.asarray(t0)
    t3 = np.asarray(t3)
    span = T3 - T0
    mid = (t3 * (imp.T_bar - T0) + t0 * (T3 - imp.T_bar)) / span
    return (
        free_time_kernel(m, T0, T3, t0, t3)
        * np.exp(1j * p * imp.E0_bar)
        * np.exp(1j * p * imp.E1_bar * mid)
    )


def impulsive_second_order_phase(m: float, p: float, imp: ImpulsiveField, T0: float, T3: float) -> float:
    """Constant phase ``(p E1_bar)^2 a b / (2 m (a + b))`` that the impulsive kernel drops.

    ``a = T3 - T_bar`` and ``b = T_bar - T0``. Multiplying ``dipole_time_kernel`` by
    ``exp(i * phase)`` gives the exact evolve-kick-evolve kernel.
    """
    _check_order(T0, imp.T_bar, T3)
    a = T3 - imp.T_bar
    b = imp.T_bar - T0
    lam = p * imp.E1_bar
    return lam**2 * a * b / (2 * m * (a + b))


def precession_shift(p: float, imp: ImpulsiveField) -> float:
    return -(p * imp.E0_bar + p * imp.E1_bar * imp.T_bar)


def evolve_dipole_component(
    packet: GaussianPacket4D,
    p: float,
    imp: ImpulsiveField,
    m: float,
    T0: float,
    T3: float,
    grid: Optional[Grid] = None,
) -> EvolvedComponent:
    """Apply ``dipole_time_kernel`` (time factor) and the free kernel (space factor) in closed form.

    The kernel's t0-dependent phase acts as a frequency kick on the prepared packet, the free
    kernel carries it to ``T3``, and the t3-dependent phase kicks it once more.
    """
    _check_order(T0, imp.T_bar, T3)
    span = T3 - T0
    lam = p * imp.E1_bar
    before = lam * (T3 - imp.T_bar) / span
    after = lam * (imp.T_bar - T0) / span
    out = packet.kick_t(before)
    out = evolve_gaussian_free(out, m, T0, T3)
    out = out.kick_t(after).scaled(np.exp(1j * p * imp.E0_bar))
    omega_shift = out.omega_a - packet.omega_a
    mean_t = out.center_t
    if grid is not None and not (grid.t_min <= mean_t <= grid.t_max):
        raise DetectorWindow(f"mean arrival time {mean_t:.4g} outside [{grid.t_min}, {grid.t_max}]")
    return EvolvedComponent(
        p=p,
        delta_omega=precession_shift(p, imp),
        delta_v=omega_shift / m,
        packet=out,
        mean_arrival_t=mean_t,
        omega_shift=omega_shift,
        omega_coefficient=after,
        delta_v_omega_over_k=(omega_shift / packet.k_a) if packet.k_a != 0 else None,
        dropped_phase=impulsive_second_order_phase(m, p, imp, T0, T3),
    )


def exact_impulsive_packet(packet: GaussianPacket4D, p: float, imp: ImpulsiveField, m: float, T0: float, T3: float):
    """Evolve to ``T_bar``, multiply by ``exp(i p (E0_bar + E1_bar t))``, evolve to ``T3``."""
    _check_order(T0, imp.T_bar, T3)
    out = evolve_gaussian_free(packet, m, T0, imp.T_bar)
    out = out.kick_t(p * imp.E1_bar).scaled(np.exp(1j * p * imp.E0_bar))
    return evolve_gaussian_free(out, m, imp.T_bar, T3)


def hump_positions(components: Sequence[EvolvedComponent], m: float) -> np.ndarray:
    """Centers of each component's time-velocity distribution ``omega / m``."""
    return np.array([c.packet.omega_a / m for c in components])


def lattice_time_factor(
    packet: GaussianPacket4D,
    p: float,
    imp: ImpulsiveField,
    m: float,
    T0: float,
    T3: float,
    t_grid: np.ndarray,
    n_free: int = 64,
    n_pulse: int = 2,
    reg_eta: float = 1e-4,
    method: str = "dense",
) -> np.ndarray:
    """Lattice evolution of the packet's time factor through a finite pulse of width ``imp.delta_T``.

    The run is split at the pulse edges: ``n_free`` slices before and after, ``n_pulse``
    slices inside, so every slice sees either no field or the full field. The returned
    samples include ``packet.amplitude_scale``.
    """
    if imp.delta_T <= 0:
        raise DomainError("the lattice needs a finite pulse duration")
    if not (T0 < imp.T1 and imp.T2 < T3):
        raise DomainError("pulse must lie strictly inside (T0, T3)")
    t = np.asarray(t_grid, dtype=float)
    psi = packet.amplitude_scale * packet.time_factor(t)
    pot = PotentialSpec(
        kind="linear_in_t_pulse", E0=imp.E0, E1=imp.E1, T_start=imp.T1, T_end=imp.T2, dipole_p=p
    )
    free = PotentialSpec()
    for a, b, n, v in ((T0, imp.T1, n_free, free), (imp.T1, imp.T2, n_pulse, pot), (imp.T2, T3, n_free, free)):
        cfg = LatticeConfig(n, a, b, t[0], t[-1], t.size, reg_eta=reg_eta, method=method)
        psi = trotter_propagate(cfg, v, psi, m)
    return psi


def phase_aligned_error(a: np.ndarray, b: np.ndarray) -> float:
    """Relative L2 distance between ``a`` and ``b`` after removing the best global phase."""
    c = np.vdot(a, b)
    ph = c / abs(c) if abs(c) > 0 else 1.0
    return float(np.linalg.norm(a * ph - b) / np.linalg.norm(b))
