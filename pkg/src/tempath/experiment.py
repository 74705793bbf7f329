"""Beam-splitting harness: evolve every dipole component, build distributions, count humps.

Distributions are sampled on three axes shared by both formalisms:

* ``t``: arrival-time density ``|phi_t(t)|^2`` at the final lab time,
* ``x``: position density ``|phi_x(x)|^2`` at the final lab time,
* ``v``: time-velocity density in ``u = omega / m`` from the time-frequency spectrum
  ``|phi_t(omega)|^2 ~ exp(-(omega - omega_a)^2 sigma_t^2)``.

Components of distinct dipole eigenvalue never interfere; the combined curve is the
weighted sum of component densities.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .dipole import (
    DipoleSpectrum,
    EvolvedComponent,
    ImpulsiveField,
    evolve_dipole_component,
    lattice_time_factor,
    phase_aligned_error,
)
from .errors import ConfigError
from .kernels import GaussianPacket4D, Grid
from .schrodinger import SchrodingerComponent, schrodinger_evolve

logger = logging.getLogger(__name__)

FORMALISMS = ("path4d", "schrodinger")
HALF_WINDOW = 10.0


def default_threads() -> int:
    """Thread cap from ``TEMPATH_THREADS`` (default: CPU count)."""
    raw = os.environ.get("TEMPATH_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"TEMPATH_THREADS must be an integer, got {raw!r}")
        if n < 1:
            raise ConfigError("TEMPATH_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class OracleSettings:
    n_t: int = 2048
    n_free: int = 64
    n_pulse: int = 2
    reg_eta: float = 1e-4
    delta_T: float = 0.01  # pulse width used when the configured field is impulsive


@dataclass(frozen=True)
class ExperimentConfig:
    mass: float
    packet: GaussianPacket4D
    spectrum: DipoleSpectrum
    field: ImpulsiveField
    T0: float
    T3: float
    formalism: str = "both"
    oracle_check: bool = False
    oracle: OracleSettings = OracleSettings()
    n_samples: int = 2001
    hump_threshold: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError("mass must be positive")
        if self.formalism not in FORMALISMS + ("both",):
            raise ConfigError(f"unknown formalism {self.formalism!r}")
        if not (self.T0 < self.field.T_bar < self.T3):
            raise ConfigError("times must satisfy T0 < T_bar < T3")
        if self.field.delta_T > 0 and not (self.T0 < self.field.T1 and self.field.T2 < self.T3):
            raise ConfigError("pulse window must lie inside (T0, T3)")
        if self.n_samples < 3:
            raise ConfigError("n_samples must be >= 3")
        if not 0 < self.hump_threshold < 1:
            raise ConfigError("hump_threshold must be in (0, 1)")

    @property
    def formalisms(self) -> Tuple[str, ...]:
        return FORMALISMS if self.formalism == "both" else (self.formalism,)


@dataclass
class Distribution:
    axis: str
    coordinate: np.ndarray
    components: List[np.ndarray]
    combined: np.ndarray


@dataclass
class ExperimentResult:
    formalism: str
    components: list
    hump_spacing_v: float
    hump_spacing_omega: float
    delta_omega_width: float
    detectable: bool
    margin: float
    distributions: Dict[str, Distribution]
    hump_count: int
    precession: List[float]
    delta_v: List[float]
    oracle_errors: Dict[float, float] = field(default_factory=dict)


def energy_width(packet: GaussianPacket4D, m: Optional[float] = None) -> float:
    """``delta_omega = max(1 / sigma_t, (k_a / omega_a) / sigma_x)``.

    When ``omega_a`` is zero and a mass is given it is replaced by ``sqrt(k_a^2 + m^2)``.
    """
    omega = packet.omega_a
    if omega == 0 and m is not None:
        omega = float(np.hypot(packet.k_a, m))
    spatial = abs(packet.k_a / omega) / packet.sigma_x if omega != 0 else 0.0
    return float(max(1.0 / packet.sigma_t, spatial))


def detectability(delta_omega_split: float, packet: GaussianPacket4D, m: Optional[float] = None) -> Tuple[bool, float]:
    """``(margin > 1, margin)`` with ``margin = |delta_omega_split| / energy_width(packet)``."""
    margin = abs(delta_omega_split) / energy_width(packet, m)
    return bool(margin > 1.0), float(margin)


def count_humps(density: np.ndarray, threshold: float = 0.05) -> int:
    """Local maxima of ``density`` above ``threshold`` times its global maximum.

    A flat run of equal samples counts once.
    """
    y = np.asarray(density, dtype=float)
    if y.size == 0 or not np.any(y > 0):
        return 0
    cut = threshold * y.max()
    # collapse plateaus
    keep = np.concatenate([[True], np.diff(y) != 0])
    z = y[keep]
    n = 0
    for i in range(z.size):
        left = z[i - 1] if i > 0 else -np.inf
        right = z[i + 1] if i + 1 < z.size else -np.inf
        if z[i] > left and z[i] > right and z[i] > cut:
            n += 1
    return n


def _gauss(y, mean, std):
    return np.exp(-0.5 * ((y - mean) / std) ** 2) / (np.sqrt(2 * np.pi) * std)


def _v_stats(packet: GaussianPacket4D, m: float) -> Tuple[float, float]:
    return packet.omega_a / m, 1.0 / (np.sqrt(2.0) * packet.sigma_t * m)


def _evolved_packets(config: ExperimentConfig, formalism: str) -> List[GaussianPacket4D]:
    out = []
    for p in config.spectrum.eigenvalues:
        if formalism == "path4d":
            out.append(evolve_dipole_component(config.packet, p, config.field, config.mass, config.T0, config.T3).packet)
        else:
            out.append(schrodinger_evolve(config.packet, p, config.field, config.mass, config.T0, config.T3).spectator)
    return out


def sample_axes(config: ExperimentConfig) -> Dict[str, np.ndarray]:
    """Sampling axes covering both formalisms, so their distributions are directly comparable."""
    packets = _evolved_packets(config, "path4d") + _evolved_packets(config, "schrodinger")
    g = Grid.covering(packets, config.n_samples, config.n_samples, HALF_WINDOW)
    stats = [_v_stats(pk, config.mass) for pk in packets]
    v_lo = min(c - HALF_WINDOW * s for c, s in stats)
    v_hi = max(c + HALF_WINDOW * s for c, s in stats)
    return {"t": g.t, "x": g.x, "v": np.linspace(v_lo, v_hi, config.n_samples)}


def _densities(packet: GaussianPacket4D, axes, m) -> Dict[str, np.ndarray]:
    w = packet.norm
    mean, std = _v_stats(packet, m)
    return {
        "t": w * np.abs(packet.time_factor(axes["t"])) ** 2,
        "x": w * np.abs(packet.space_factor(axes["x"])) ** 2,
        "v": w * _gauss(axes["v"], mean, std),
    }


def _component(config: ExperimentConfig, formalism: str, p: float):
    if formalism == "path4d":
        return evolve_dipole_component(config.packet, p, config.field, config.mass, config.T0, config.T3)
    return schrodinger_evolve(config.packet, p, config.field, config.mass, config.T0, config.T3)


def _oracle_error(config: ExperimentConfig, comp: EvolvedComponent) -> float:
    s = config.oracle
    imp = config.field if config.field.delta_T > 0 else config.field.with_duration(s.delta_T)
    g = Grid.covering([config.packet, comp.packet], s.n_t, 2, HALF_WINDOW)
    psi = lattice_time_factor(
        config.packet, comp.p, imp, config.mass, config.T0, config.T3, g.t, s.n_free, s.n_pulse, s.reg_eta
    )
    ref = comp.packet.amplitude_scale * comp.packet.time_factor(g.t)
    return phase_aligned_error(psi, ref)


def run_experiment(config: ExperimentConfig, formalism: Optional[str] = None, threads: Optional[int] = None) -> ExperimentResult:
    """Evolve every component of ``config.spectrum`` under one formalism and assemble the result.

    ``formalism`` defaults to the config's choice, which must then be a single formalism.
    With ``config.oracle_check`` each path4d component is re-derived on the lattice and
    the phase-aligned relative L2 error of its time factor is stored in ``oracle_errors``.
    """
    formalism = formalism or config.formalism
    if formalism not in FORMALISMS:
        raise ConfigError(f"run_experiment needs a single formalism, got {formalism!r}")
    threads = threads or default_threads()
    ps = config.spectrum.eigenvalues
    weights = config.spectrum.weights
    with ThreadPoolExecutor(max_workers=threads) as pool:
        comps = list(pool.map(lambda p: _component(config, formalism, p), ps))
        oracle = {}
        if config.oracle_check and formalism == "path4d":
            errs = list(pool.map(lambda c: _oracle_error(config, c), comps))
            oracle = dict(zip(ps, errs))

    packets = [c.packet if formalism == "path4d" else c.spectator for c in comps]
    axes = sample_axes(config)
    dists = {}
    per = [_densities(pk, axes, config.mass) for pk in packets]
    for axis in ("t", "x", "v"):
        parts = [d[axis] for d in per]
        combined = sum(w * d for w, d in zip(weights, parts))
        dists[axis] = Distribution(axis, axes[axis], parts, combined)

    centers = np.array([pk.omega_a / config.mass for pk in packets])
    spacing_v = float(np.mean(np.diff(centers))) if len(ps) > 1 else 0.0
    spacing_omega = spacing_v * config.mass
    detectable, margin = detectability(spacing_omega, config.packet, config.mass)
    width = energy_width(config.packet, config.mass)
    if formalism == "path4d":
        precession = [c.delta_omega for c in comps]
        delta_v = [c.delta_v for c in comps]
    else:
        precession = [c.delta_omega for c in comps]
        delta_v = [0.0 for _ in comps]
    return ExperimentResult(
        formalism=formalism,
        components=comps,
        hump_spacing_v=spacing_v,
        hump_spacing_omega=spacing_omega,
        delta_omega_width=float(width),
        detectable=detectable,
        margin=margin,
        distributions=dists,
        hump_count=count_humps(dists["v"].combined, config.hump_threshold),
        precession=precession,
        delta_v=delta_v,
        oracle_errors=oracle,
    )


def run_all(config: ExperimentConfig, threads: Optional[int] = None) -> Dict[str, ExperimentResult]:
    return {f: run_experiment(config, f, threads) for f in config.formalisms}


@dataclass
class ComparisonReport:
    precession_rows: List[Tuple[float, float, float]]
    precession_agree: bool
    hump_counts: Dict[str, int]
    split_only_in_path4d: bool
    max_l1: Dict[str, float]

    def to_dict(self) -> dict:
        return {
            "precession": [
                {"p": p, "path4d": a, "schrodinger": b, "difference": a - b} for p, a, b in self.precession_rows
            ],
            "precession_agree": self.precession_agree,
            "hump_counts": dict(self.hump_counts),
            "split_only_in_path4d": self.split_only_in_path4d,
            "l1_distance": dict(self.max_l1),
        }

    def csv_rows(self) -> List[List]:
        rows = [["quantity", "p", "path4d", "schrodinger"]]
        for p, a, b in self.precession_rows:
            rows.append(["precession", p, a, b])
        rows.append(["hump_count", "", self.hump_counts.get("path4d"), self.hump_counts.get("schrodinger")])
        return rows


def compare_formalisms(result_path4d: ExperimentResult, result_schrodinger: ExperimentResult) -> ComparisonReport:
    """Side-by-side precession, hump counts and L1 distances of the combined distributions."""
    if result_path4d.formalism != "path4d" or result_schrodinger.formalism != "schrodinger":
        raise ConfigError("compare_formalisms expects (path4d, schrodinger) results")
    ps = [c.p for c in result_path4d.components]
    rows = list(zip(ps, result_path4d.precession, result_schrodinger.precession))
    agree = all(abs(a - b) <= 1e-12 for _, a, b in rows)
    l1 = {}
    for axis, d in result_path4d.distributions.items():
        other = result_schrodinger.distributions[axis]
        if d.coordinate.shape != other.coordinate.shape or not np.allclose(d.coordinate, other.coordinate):
            raise ConfigError("results were sampled on different axes")
        l1[axis] = float(trapezoid(np.abs(d.combined - other.combined), d.coordinate))
    split = abs(result_path4d.hump_spacing_v) > 0 and result_schrodinger.hump_spacing_v == 0
    return ComparisonReport(
        rows,
        agree,
        {"path4d": result_path4d.hump_count, "schrodinger": result_schrodinger.hump_count},
        split,
        l1,
    )
