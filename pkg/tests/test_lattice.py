import numpy as np
import pytest

from tempath.errors import BoundaryLeak, DomainError
from tempath.kernels import Event, GaussianPacket4D, Grid, evolve_gaussian_free, free_action
from tempath.lattice import (
    LatticeConfig,
    PotentialSpec,
    _propagate_once,
    bandlimited_kernel_row,
    kernel_compose_check,
    sample_fourier_paths,
    trotter_propagate,
)

from conftest import rel_l2

M = 1.0
T_END = 4.0


def _setup(packet, n_slices, n=1024, **kw):
    ev = evolve_gaussian_free(packet, M, 0.0, T_END)
    g = Grid.covering([packet, ev], n, n)
    cfg = LatticeConfig(n_slices, 0.0, T_END, g.t_min, g.t_max, n, n, g.x_min, g.x_max, **kw)
    return cfg, ev


def test_free_time_axis_matches_closed_form(packet):
    cfg, ev = _setup(packet, 64)
    psi = trotter_propagate(cfg, PotentialSpec(), packet.time_factor(cfg.t), M)
    assert rel_l2(psi, ev.time_factor(cfg.t)) < 1e-8


def test_separable_and_full_2d_agree(rest_packet):
    cfg, ev = _setup(rest_packet, 8, n=128, reg_eta=0.0)
    pt, px = rest_packet.time_factor(cfg.t), rest_packet.space_factor(cfg.x)
    a_t, a_x = trotter_propagate(cfg, PotentialSpec(), (pt, px), M)
    full = trotter_propagate(cfg, PotentialSpec(), np.outer(pt, px), M)
    assert rel_l2(full, np.outer(a_t, a_x)) < 1e-12


def test_error_decreases_with_slices(packet):
    errs = []
    for n in (16, 32, 64):
        cfg, ev = _setup(packet, n, n=512)
        psi = trotter_propagate(cfg, PotentialSpec(), packet.time_factor(cfg.t), M)
        errs.append(rel_l2(psi, ev.time_factor(cfg.t)))
    assert errs[0] > errs[1] > errs[2]


def test_raw_damping_error_is_order_eta_eps(packet):
    """Without extrapolation the damped error halves with the slice width."""
    errs = []
    for n in (32, 64):
        cfg, ev = _setup(packet, n, n=512)
        psi = _propagate_once(cfg, PotentialSpec(), packet.time_factor(cfg.t), M, 1e-4)
        errs.append(rel_l2(psi, ev.time_factor(cfg.t)))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)


def test_one_slice_identity(packet):
    """A single undamped slice is the analytic kernel applied once (band-limited quadrature)."""
    cfg, ev = _setup(packet, 1, n=1024, reg_eta=0.0)
    psi = trotter_propagate(cfg, PotentialSpec(), packet.time_factor(cfg.t), M)
    assert rel_l2(psi, ev.time_factor(cfg.t)) < 1e-11


def test_regularization_independence(packet):
    cfg1, ev = _setup(packet, 32, n=512, reg_eta=1e-4)
    cfg2, _ = _setup(packet, 32, n=512, reg_eta=5e-5)
    a = trotter_propagate(cfg1, PotentialSpec(), packet.time_factor(cfg1.t), M)
    b = trotter_propagate(cfg2, PotentialSpec(), packet.time_factor(cfg2.t), M)
    assert rel_l2(a, b) < 1e-6


@pytest.mark.parametrize("n_slices,eta", [(16, 0.0), (64, 1e-4)])
def test_mass_drift_per_slice(packet, n_slices, eta):
    cfg, _ = _setup(packet, n_slices, n=512, reg_eta=eta)
    psi0 = packet.time_factor(cfg.t)
    psi = trotter_propagate(cfg, PotentialSpec(), psi0, M)
    n0 = np.sum(np.abs(psi0) ** 2)
    n1 = np.sum(np.abs(psi) ** 2)
    assert abs(n1 - n0) / n0 / cfg.n_slices < 1e-9


def test_dense_and_fft_agree(packet):
    cfg, _ = _setup(packet, 16, n=512)
    cfg_fft = LatticeConfig(**{**cfg.__dict__, "method": "fft"})
    a = trotter_propagate(cfg, PotentialSpec(), packet.time_factor(cfg.t), M)
    b = trotter_propagate(cfg_fft, PotentialSpec(), packet.time_factor(cfg.t), M)
    assert rel_l2(b, a) < 1e-10


def test_kernel_row_symmetry_and_sum():
    short = bandlimited_kernel_row(1.0, 0.05, 0.1, 64, -1)
    long = bandlimited_kernel_row(1.0, 0.05, 0.1, 4096, -1)
    assert np.array_equal(short, short[::-1])
    # the row sums to the unit kernel integral; truncation error shrinks with the row length
    assert abs(long.sum() - 1) < abs(short.sum() - 1) < 1e-2


def test_boundary_leak_detected(packet):
    cfg = LatticeConfig(8, 0.0, T_END, -3.0, 3.0, 256)
    with pytest.raises(BoundaryLeak):
        trotter_propagate(cfg, PotentialSpec(), packet.time_factor(cfg.t), M)


def test_config_validation():
    with pytest.raises(DomainError):
        LatticeConfig(0, 0.0, 1.0, -1, 1, 16)
    with pytest.raises(DomainError):
        LatticeConfig(4, 1.0, 1.0, -1, 1, 16)
    with pytest.raises(DomainError):
        PotentialSpec(kind="quartic")


def test_potential_spec_pulse():
    v = PotentialSpec(kind="linear_in_t_pulse", E0=2.0, E1=1.0, T_start=1.0, T_end=1.1, dipole_p=0.5)
    assert v.time_part(0.5, 1.0) is None
    assert v(1.05, 2.0, 0.0) == pytest.approx(-0.5 * (2.0 + 2.0))


@pytest.mark.parametrize("kind", ["time", "space"])
def test_compose_check_equal_slices(kind):
    assert kernel_compose_check(1.0, [0.0, 1.0, 2.0, 3.0], kind=kind) < 1e-8


def test_compose_check_degenerate_window_is_poor():
    # a single interior quadrature point cannot represent the intermediate integral
    assert kernel_compose_check(1.0, [0.0, 1.0, 2.0], n_points=1, t_window=0.5) > 1e-2


def test_compose_check_needs_three_times():
    with pytest.raises(DomainError):
        kernel_compose_check(1.0, [0.0, 1.0])


ENDPOINTS = (0.0, Event(0.0, 0.0), 2.0, Event(2.5, 0.7))


def _cfg(seed=0):
    return LatticeConfig(16, 0.0, 2.0, -5, 5, 64, seed=seed)


def test_paths_zero_amplitude_give_straight_action():
    ens = sample_fourier_paths(_cfg(), ENDPOINTS, 8, amplitude=0.0)
    assert np.allclose(ens.actions, free_action(1.0, 0.0, 2.0, ENDPOINTS[1], ENDPOINTS[3]), atol=1e-12)
    assert ens.overshoot == 0.0


def test_paths_deterministic_by_seed():
    a = sample_fourier_paths(_cfg(3), ENDPOINTS, 20)
    b = sample_fourier_paths(_cfg(3), ENDPOINTS, 20)
    c = sample_fourier_paths(_cfg(4), ENDPOINTS, 20)
    assert np.array_equal(a.coefficients, b.coefficients) and np.array_equal(a.actions, b.actions)
    assert not np.array_equal(a.coefficients, c.coefficients)


def test_overshoot_monotone_in_amplitude():
    fr = [sample_fourier_paths(_cfg(), ENDPOINTS, 200, amplitude=a).overshoot for a in (0.05, 0.2, 0.8)]
    assert fr[0] <= fr[1] <= fr[2]
    assert fr[2] > 0


def test_stationary_path_minimizes_action_offset():
    ens = sample_fourier_paths(_cfg(), ENDPOINTS, 200, amplitude=0.3)
    dev = np.abs(ens.actions - ens.straight_action)
    assert dev.min() > 1e-10


def test_action_offset_is_quadratic_in_amplitude():
    d = []
    for a in (0.01, 0.02):
        ens = sample_fourier_paths(_cfg(), ENDPOINTS, 50, amplitude=a)
        d.append(np.mean(np.abs(ens.actions - ens.straight_action)))
    assert d[1] / d[0] == pytest.approx(4.0, rel=1e-6)
