import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle_values import DELTA_V_COEFFICIENT
from tempath.dipole import (
    DipoleSpectrum,
    ImpulsiveField,
    dipole_interaction_energy,
    dipole_time_kernel,
    evolve_dipole_component,
    exact_impulsive_packet,
    hump_positions,
    impulsive_second_order_phase,
    lattice_time_factor,
    phase_aligned_error,
    precession_shift,
)
from tempath.errors import DetectorWindow, DomainError
from tempath.kernels import GaussianPacket4D, Grid, evolve_gaussian_free, free_time_kernel

M, T0, T3 = 1.0, 0.0, 4.0
IMP = ImpulsiveField(0.1, 0.05, 1.0)


def mean_omega(psi, t):
    """Mean frequency of samples ``psi(t)`` with the ``exp(-i omega t)`` convention."""
    w = 2 * np.pi * np.fft.fftfreq(t.size, t[1] - t[0])
    P = np.abs(np.fft.fft(psi)) ** 2
    return -float(np.sum(w * P) / np.sum(P))


def test_zero_field_reduces_to_free():
    t0, t3 = np.meshgrid(np.linspace(-3, 3, 9), np.linspace(-2, 6, 9))
    K = dipole_time_kernel(M, 0.7, ImpulsiveField(0.0, 0.0, 1.5), T0, T3, t0, t3)
    assert np.max(np.abs(K - free_time_kernel(M, T0, T3, t0, t3))) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 3.8))
def test_modulus_is_free_modulus(p, E0b, E1b, Tb):
    t0, t3 = np.meshgrid(np.linspace(-3, 3, 5), np.linspace(-2, 6, 5))
    K = dipole_time_kernel(M, p, ImpulsiveField(E0b, E1b, Tb), T0, T3, t0, t3)
    assert np.allclose(np.abs(K), np.abs(free_time_kernel(M, T0, T3, t0, t3)), rtol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 2), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 3.8))
def test_antisymmetry_in_p(p, E0b, E1b, Tb):
    """The field-dependent phase is odd in p."""
    t0, t3 = np.meshgrid(np.linspace(-3, 3, 5), np.linspace(-2, 6, 5))
    imp = ImpulsiveField(E0b, E1b, Tb)
    K0 = free_time_kernel(M, T0, T3, t0, t3)
    a = dipole_time_kernel(M, p, imp, T0, T3, t0, t3) / K0
    b = dipole_time_kernel(M, -p, imp, T0, T3, t0, t3) / K0
    assert np.allclose(a * b, 1.0, atol=1e-12)


def test_second_order_phase_completes_the_impulsive_kernel(packet):
    """Closed-form component times exp(i phi2) equals evolve-kick-evolve."""
    p = 1.3
    comp = evolve_dipole_component(packet, p, IMP, M, T0, T3)
    exact = exact_impulsive_packet(packet, p, IMP, M, T0, T3)
    t = np.linspace(exact.center_t - 10, exact.center_t + 10, 501)
    a = comp.packet.time_factor(t) * comp.packet.amplitude_scale * np.exp(1j * comp.dropped_phase)
    b = exact.time_factor(t) * exact.amplitude_scale
    assert np.max(np.abs(a - b)) < 1e-12
    assert comp.dropped_phase == pytest.approx(impulsive_second_order_phase(M, p, IMP, T0, T3))


def test_pure_offset_field_only_precesses(packet):
    imp = ImpulsiveField(0.4, 0.0, 1.0)
    comp = evolve_dipole_component(packet, 1.0, imp, M, T0, T3)
    free = evolve_gaussian_free(packet, M, T0, T3)
    assert comp.delta_v == 0.0
    assert comp.delta_omega == pytest.approx(-0.4)
    assert comp.packet.omega_a == pytest.approx(free.omega_a)
    assert comp.packet.amplitude_scale == pytest.approx(np.exp(0.4j))


@pytest.mark.parametrize("p,E1b", [(1.0, 0.05), (2.0, 0.3), (0.5, 1.0)])
def test_positive_coupling_slows_time_motion(packet, p, E1b):
    comp = evolve_dipole_component(packet, p, ImpulsiveField(0.0, E1b, 1.0), M, T0, T3)
    assert comp.delta_v < 0
    assert comp.omega_shift == pytest.approx(-p * E1b, abs=1e-14)
    assert comp.delta_v == pytest.approx(-p * E1b / M, abs=1e-14)
    assert comp.delta_v_omega_over_k == pytest.approx(comp.omega_shift / packet.k_a)


def test_delta_v_coefficient_frozen():
    assert DELTA_V_COEFFICIENT == pytest.approx(-1.0, abs=1e-6)


@pytest.mark.slow
def test_lattice_delta_v_coefficient():
    """Finite-pulse lattice reproduces the frozen coefficient to first order in the width."""
    pk = GaussianPacket4D(0.0, 0.0, 1.0, 0.0, 1.0, 1.0)
    imp = ImpulsiveField(0.1, 0.05, 1.0, 0.025)
    ex = exact_impulsive_packet(pk, 1.0, imp, M, T0, T3)
    t = Grid.covering([pk, ex], 1024, 16).t
    psi = lattice_time_factor(pk, 1.0, imp, M, T0, T3, t)
    coef = (mean_omega(psi, t) - pk.omega_a) / imp.E1_bar
    assert coef == pytest.approx(DELTA_V_COEFFICIENT, abs=1e-4)


def test_three_slice_composition_matches_lattice():
    pk = GaussianPacket4D(0.0, 0.0, 1.0, 0.0, 1.0, 1.0)
    imp = ImpulsiveField(0.1, 0.05, 1.0, 0.01)
    ex = exact_impulsive_packet(pk, 1.0, imp, M, T0, T3)
    t = Grid.covering([pk, ex], 1024, 16).t
    psi = lattice_time_factor(pk, 1.0, imp, M, T0, T3, t)
    ref = ex.amplitude_scale * ex.time_factor(t)
    assert np.linalg.norm(psi - ref) / np.linalg.norm(ref) < 1e-5
    assert phase_aligned_error(psi, ref) < 1e-5


def test_halving_pulse_slices_is_stable():
    pk = GaussianPacket4D(0.0, 0.0, 1.0, 0.0, 1.0, 1.0)
    imp = ImpulsiveField(0.1, 0.05, 1.0, 0.01)
    t = Grid.covering([pk, evolve_gaussian_free(pk, M, T0, T3)], 1024, 16).t
    a = lattice_time_factor(pk, 1.0, imp, M, T0, T3, t, n_pulse=2)
    b = lattice_time_factor(pk, 1.0, imp, M, T0, T3, t, n_pulse=4)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) < 1e-4


def test_interaction_energy():
    t = np.linspace(-1, 1, 5)
    V = dipole_interaction_energy(2.0, 0.1, 0.3, t, tdot=1.0)
    assert np.allclose(V, -2.0 * (0.1 + 0.3 * t))
    assert np.all(dipole_interaction_energy(2.0, 0.1, 0.3, t, inside=False) == 0)
    # the t-gradient of the energy is the force -p E1 on the time coordinate
    assert np.allclose(np.gradient(V, t), -2.0 * 0.3)
    # energy scales with tdot
    assert np.allclose(dipole_interaction_energy(2.0, 0.1, 0.3, t, tdot=0.5), 0.5 * V)


def test_precession_shift():
    assert precession_shift(2.0, ImpulsiveField(0.1, 0.2, 3.0)) == pytest.approx(-(0.2 + 1.2))


def test_field_from_strengths():
    imp = ImpulsiveField.from_field(2.0, 1.0, 0.975, 1.025)
    assert imp.E0_bar == pytest.approx(0.1)
    assert imp.E1_bar == pytest.approx(0.05)
    assert imp.T_bar == pytest.approx(1.0)
    assert imp.E0 == pytest.approx(2.0)
    with pytest.raises(DomainError):
        ImpulsiveField(0.1, 0.1, 1.0).E0
    with pytest.raises(DomainError):
        ImpulsiveField.from_field(1, 1, 2, 1)


def test_detector_window(packet):
    g = Grid(-1, 1, 16, -5, 5, 16)
    with pytest.raises(DetectorWindow):
        evolve_dipole_component(packet, 1.0, IMP, M, T0, T3, grid=g)


def test_pulse_must_be_inside_interval(packet):
    with pytest.raises(DomainError):
        evolve_dipole_component(packet, 1.0, ImpulsiveField(0.1, 0.1, 5.0), M, T0, T3)


def test_spectrum_validation():
    s = DipoleSpectrum((1.0, -1.0), (3.0, 1.0))
    assert s.eigenvalues == (-1.0, 1.0)
    assert s.weights == pytest.approx((0.25, 0.75))
    for bad in [((1.0,), (1.0, 2.0)), ((1.0,), (-1.0,)), ((), ())]:
        with pytest.raises(DomainError):
            DipoleSpectrum(*bad)


def test_hump_positions_split_by_eigenvalue(packet):
    comps = [evolve_dipole_component(packet, p, IMP, M, T0, T3) for p in (-1.0, 1.0)]
    h = hump_positions(comps, M)
    assert h[0] - h[1] == pytest.approx(2 * IMP.E1_bar / M)
