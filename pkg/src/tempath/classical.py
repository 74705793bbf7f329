"""Classical motion in (t, x) parameterized by lab time T, actions, gauge changes and the van Vleck kernel.

The Lagrangian is

    L = -(m/2) tdot^2 + (m/2) xdot^2 - q phi tdot + q A_x xdot - V(t, x)

with dots meaning d/dT. Its Euler-Lagrange equations are

    m tddot = q E xdot + dV/dt,      m xddot = q E tdot - dV/dx,

where ``E = -dphi/dx - dA_x/dt``. The scalar potential ``V`` may be switched on only
inside a lab-time window; integration segments are aligned to the window edges so
that every step sees a smooth right-hand side.

Gauge convention: ``phi -> phi - dLambda/dt`` and ``A_x -> A_x + dLambda/dx``. The
Lagrangian then changes by ``q dLambda/dT`` and the action by ``q (Lambda_end - Lambda_start)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import CausticError, DomainError, NoTrajectory, StepRejected
from .kernels import Event

FD_STEP = 1e-6
VAN_VLECK_STEP = 1e-4
CAUSTIC_LIMIT = 1e12
#: C that turns the van Vleck form into the exact free kernel in 1+1 dimensions.
FREE_VAN_VLECK_CONSTANT = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class ClassicalState:
    T: float
    t: float
    x: float
    tdot: float
    xdot: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.T, self.t, self.x, self.tdot, self.xdot)):
            raise DomainError("classical state must be finite")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.t, self.x, self.tdot, self.xdot])


def _fd_grad(f, t, x, h=FD_STEP):
    return (
        (f(t + h, x) - f(t - h, x)) / (2 * h),
        (f(t, x + h) - f(t, x - h)) / (2 * h),
    )


@dataclass(frozen=True)
class GaugeFunction:
    """Scalar ``Lambda(t, x)`` with optional analytic gradient and Hessian.

    ``grad`` returns ``(Lambda_t, Lambda_x)``; ``hess`` returns ``(Lambda_tt, Lambda_tx, Lambda_xx)``.
    Missing derivatives fall back to central differences.
    """

    value: Callable
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None

    def __call__(self, t, x):
        return self.value(t, x)

    def gradient(self, t, x):
        if self.grad is not None:
            return self.grad(t, x)
        return _fd_grad(self.value, t, x)

    def hessian(self, t, x):
        if self.hess is not None:
            return self.hess(t, x)
        if self.grad is not None:
            h = FD_STEP
            gtp, gxp = self.grad(t + h, x)
            gtm, gxm = self.grad(t - h, x)
            _, gxp_x = self.grad(t, x + h)
            _, gxm_x = self.grad(t, x - h)
            return (gtp - gtm) / (2 * h), (gxp - gxm) / (2 * h), (gxp_x - gxm_x) / (2 * h)
        h = 1e-4
        f = self.value
        f0 = f(t, x)
        tt = (f(t + h, x) - 2 * f0 + f(t - h, x)) / h**2
        xx = (f(t, x + h) - 2 * f0 + f(t, x - h)) / h**2
        tx = (f(t + h, x + h) - f(t + h, x - h) - f(t - h, x + h) + f(t - h, x - h)) / (4 * h**2)
        return tt, tx, xx


def _sum_gauges(a: Optional[GaugeFunction], b: GaugeFunction) -> GaugeFunction:
    if a is None:
        return b
    return GaugeFunction(
        value=lambda t, x: a(t, x) + b(t, x),
        grad=lambda t, x: tuple(u + v for u, v in zip(a.gradient(t, x), b.gradient(t, x))),
        hess=lambda t, x: tuple(u + v for u, v in zip(a.hessian(t, x), b.hessian(t, x))),
    )


@dataclass(frozen=True)
class FieldConfig:
    """Electromagnetic potentials and an optional scalar potential in (t, x).

    ``phi_grad`` returns ``(phi_t, phi_x)`` and ``A_grad`` returns ``(A_t, A_x_x)``; when absent,
    central differences with step 1e-6 are used. ``potential`` is ``V(t, x)`` with optional
    ``potential_grad`` returning ``(V_t, V_x)``; it acts only for lab times inside ``window``
    (always, if ``window`` is None). ``gauge_term`` records the accumulated gauge function.
    """

    phi: Optional[Callable] = None
    A_x: Optional[Callable] = None
    gauge_term: Optional[GaugeFunction] = None
    phi_grad: Optional[Callable] = None
    A_grad: Optional[Callable] = None
    potential: Optional[Callable] = None
    potential_grad: Optional[Callable] = None
    window: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.window is not None and not self.window[1] >= self.window[0]:
            raise DomainError("window must satisfy end >= start")

    @classmethod
    def dipole_pulse(cls, p: float, E0: float, E1: float, T1: float, T2: float) -> "FieldConfig":
        """``V = -p (E0 + E1 t)`` for ``T1 <= T <= T2``."""
        return cls(
            potential=lambda t, x: -p * (E0 + E1 * np.asarray(t)) + 0.0 * np.asarray(x),
            potential_grad=lambda t, x: (
                np.full(np.broadcast(t, x).shape, -p * E1),
                np.zeros(np.broadcast(t, x).shape),
            ),
            window=(T1, T2),
        )

    def potential_active(self, T: float) -> bool:
        if self.potential is None:
            return False
        return self.window is None or self.window[0] <= T <= self.window[1]

    def phi_parts(self, t, x):
        if self.phi is None:
            z = np.zeros(np.broadcast(t, x).shape)
            return z, z, z
        g = self.phi_grad(t, x) if self.phi_grad is not None else _fd_grad(self.phi, t, x)
        return self.phi(t, x), g[0], g[1]

    def A_parts(self, t, x):
        if self.A_x is None:
            z = np.zeros(np.broadcast(t, x).shape)
            return z, z, z
        g = self.A_grad(t, x) if self.A_grad is not None else _fd_grad(self.A_x, t, x)
        return self.A_x(t, x), g[0], g[1]

    def V_parts(self, t, x):
        if self.potential is None:
            z = np.zeros(np.broadcast(t, x).shape)
            return z, z, z
        g = self.potential_grad(t, x) if self.potential_grad is not None else _fd_grad(self.potential, t, x)
        return self.potential(t, x), g[0], g[1]

    def electric_field(self, t, x):
        _, _, phi_x = self.phi_parts(t, x)
        _, A_t, _ = self.A_parts(t, x)
        return -phi_x - A_t

    def breakpoints(self, T0: float, T1: float) -> List[float]:
        pts = [T0, T1]
        if self.potential is not None and self.window is not None:
            pts += [w for w in self.window if T0 < w < T1]
        return sorted(set(pts))


def gauge_transform(fields: FieldConfig, Lambda) -> FieldConfig:
    """Return fields with ``phi - Lambda_t`` and ``A_x + Lambda_x``; E is untouched.

    ``Lambda`` may be a ``GaugeFunction`` or a plain callable ``Lambda(t, x)``.
    """
    lam = Lambda if isinstance(Lambda, GaugeFunction) else GaugeFunction(Lambda)

    def phi(t, x):
        return fields.phi_parts(t, x)[0] - lam.gradient(t, x)[0]

    def phi_grad(t, x):
        _, pt, px = fields.phi_parts(t, x)
        tt, tx, _ = lam.hessian(t, x)
        return pt - tt, px - tx

    def A_x(t, x):
        return fields.A_parts(t, x)[0] + lam.gradient(t, x)[1]

    def A_grad(t, x):
        _, at, ax = fields.A_parts(t, x)
        _, tx, xx = lam.hessian(t, x)
        return at + tx, ax + xx

    return replace(
        fields,
        phi=phi,
        phi_grad=phi_grad,
        A_x=A_x,
        A_grad=A_grad,
        gauge_term=_sum_gauges(fields.gauge_term, lam),
    )


def _rhs(fields: FieldConfig, m, q, active, y):
    t, x, td, xd = y
    E = fields.electric_field(t, x) if (fields.phi is not None or fields.A_x is not None) else 0.0
    if active:
        _, Vt, Vx = fields.V_parts(t, x)
    else:
        Vt = Vx = 0.0
    ta = (q * E * xd + Vt) / m
    xa = (q * E * td - Vx) / m
    return np.array([td, xd, ta + 0.0 * t, xa + 0.0 * t])


def _rk4(fields, m, q, active, y, h):
    k1 = _rhs(fields, m, q, active, y)
    k2 = _rhs(fields, m, q, active, y + 0.5 * h * k1)
    k3 = _rhs(fields, m, q, active, y + 0.5 * h * k2)
    k4 = _rhs(fields, m, q, active, y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _lagrangian(fields: FieldConfig, m, q, active, y):
    t, x, td, xd = y
    L = -0.5 * m * td**2 + 0.5 * m * xd**2
    if fields.phi is not None:
        L = L - q * fields.phi_parts(t, x)[0] * td
    if fields.A_x is not None:
        L = L + q * fields.A_parts(t, x)[0] * xd
    if active:
        L = L - fields.V_parts(t, x)[0]
    return L


def _momenta(fields: FieldConfig, m, q, y):
    t, x, td, xd = y
    p_t = -m * td
    p_x = m * xd
    if fields.phi is not None:
        p_t = p_t - q * fields.phi_parts(t, x)[0]
    if fields.A_x is not None:
        p_x = p_x + q * fields.A_parts(t, x)[0]
    return p_t, p_x


def _segments(fields, T0, T1):
    pts = fields.breakpoints(T0, T1)
    return [(a, b, fields.potential_active(0.5 * (a + b))) for a, b in zip(pts[:-1], pts[1:])]


def _integrate_batch(fields, m, q, T0, T1, y0, steps_per_segment, with_action=True):
    """Fixed-step RK4 for a batch ``y0`` of shape (4, n); returns final state and trapezoid action."""
    y = np.array(y0, dtype=float)
    S = np.zeros(y.shape[1:])
    for a, b, active in _segments(fields, T0, T1):
        h = (b - a) / steps_per_segment
        L_prev = _lagrangian(fields, m, q, active, y) if with_action else 0.0
        for _ in range(steps_per_segment):
            y = _rk4(fields, m, q, active, y, h)
            if with_action:
                L_new = _lagrangian(fields, m, q, active, y)
                S = S + 0.5 * h * (L_prev + L_new)
                L_prev = L_new
    return y, S


class Trajectory(list):
    """List of ``ClassicalState`` with integration diagnostics in ``diagnostics``."""

    def __init__(self, states, diagnostics=None):
        super().__init__(states)
        self.diagnostics = diagnostics or {}


def integrate_trajectory(
    fields: FieldConfig,
    init: ClassicalState,
    T_end: float,
    dT_step: float,
    m: float = 1.0,
    q: float = 1.0,
    local_tol: float = 1e-8,
    max_halvings: int = 12,
) -> Trajectory:
    """RK4 integration of the Euler-Lagrange equations from ``init`` to ``T_end``.

    Output states sit on a uniform step of at most ``dT_step`` inside each segment between
    window edges. Each step's local error is estimated by step doubling; a step whose
    estimate exceeds ``local_tol`` is split in two, up to ``max_halvings`` times.

    ``diagnostics['p_t_drift']`` is the largest change of ``-m tdot - q phi``, which is
    conserved when the fields do not depend on ``t``.
    """
    if not dT_step > 0:
        raise DomainError("dT_step must be positive")
    if not T_end > init.T:
        raise DomainError("T_end must be after the initial lab time")
    y = init.vector[:, None]
    states = [init]
    max_err = 0.0

    def advance(y, active, h, depth):
        nonlocal max_err
        full = _rk4(fields, m, q, active, y, h)
        half = _rk4(fields, m, q, active, _rk4(fields, m, q, active, y, 0.5 * h), 0.5 * h)
        err = float(np.max(np.abs(full - half))) / 15.0
        if err <= local_tol:
            max_err = max(max_err, err)
            return full
        if depth >= max_halvings:
            raise StepRejected(f"local error {err:.3g} above {local_tol:g} after {depth} halvings")
        mid = advance(y, active, 0.5 * h, depth + 1)
        return advance(mid, active, 0.5 * h, depth + 1)

    for a, b, active in _segments(fields, init.T, T_end):
        n = max(1, int(math.ceil((b - a) / dT_step - 1e-12)))
        h = (b - a) / n
        for k in range(n):
            y = advance(y, active, h, 0)
            T = b if k == n - 1 else a + (k + 1) * h
            states.append(ClassicalState(T, *(float(v) for v in y[:, 0])))
    p0 = _momenta(fields, m, q, init.vector)[0]
    drift = max(abs(float(_momenta(fields, m, q, s.vector)[0]) - float(p0)) for s in states)
    return Trajectory(states, {"p_t_drift": drift, "max_local_error": max_err})


def classical_action(trajectory, fields: FieldConfig, m: float = 1.0, q: float = 1.0) -> float:
    """Trapezoid quadrature of the Lagrangian over the sampled trajectory."""
    S = 0.0
    for s0, s1 in zip(trajectory[:-1], trajectory[1:]):
        active = fields.potential_active(0.5 * (s0.T + s1.T))
        L0 = _lagrangian(fields, m, q, active, s0.vector)
        L1 = _lagrangian(fields, m, q, active, s1.vector)
        S += 0.5 * (s1.T - s0.T) * float(L0 + L1)
    return S


@dataclass
class ShootingResult:
    velocity: np.ndarray  # (2, n) initial (tdot, xdot)
    action: np.ndarray  # actions corrected to the exact target endpoints
    momenta: Tuple[np.ndarray, np.ndarray]  # final canonical (p_t, p_x)
    final_velocity: np.ndarray  # final (tdot, xdot)
    iterations: int
    residual: float


def shoot(
    fields: FieldConfig,
    m: float,
    q: float,
    T1: float,
    T2: float,
    start,
    target,
    steps_per_segment: int = 16,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> ShootingResult:
    """Find initial velocities joining ``start`` at ``T1`` to ``target`` at ``T2`` (batched).

    ``start`` and ``target`` are arrays of shape (2, n) holding (t, x). Secant (Broyden)
    updates start from the free-motion Jacobian. Trajectories keep iterating until their
    endpoint mismatch stops improving below ``tol`` (or reaches rounding level); only the
    unfinished ones are re-integrated.
    """
    if not T2 > T1:
        raise DomainError("need T2 > T1")
    start = np.asarray(start, dtype=float)
    target = np.asarray(target, dtype=float)
    dT = T2 - T1
    n = start.shape[1]
    v = (target - start) / dT
    J = np.zeros((n, 2, 2))
    J[:, 0, 0] = J[:, 1, 1] = dT
    floor = 4 * np.finfo(float).eps * (1.0 + np.max(np.abs(target), axis=0))

    y, S = _integrate_batch(fields, m, q, T1, T2, np.vstack([start, v]), steps_per_segment)
    r = y[:2] - target
    err = np.max(np.abs(r), axis=0)
    active = err > floor
    it = 0
    while it < max_iter and np.any(active):
        if not np.all(np.isfinite(err)):
            raise NoTrajectory("shooting diverged")
        idx = np.nonzero(active)[0]
        Ja = J[idx]
        dv = -np.linalg.solve(Ja, r[:, idx].T[:, :, None])[:, :, 0].T
        v_try = v[:, idx] + dv
        y_try, S_try = _integrate_batch(
            fields, m, q, T1, T2, np.vstack([start[:, idx], v_try]), steps_per_segment
        )
        r_try = y_try[:2] - target[:, idx]
        err_try = np.max(np.abs(r_try), axis=0)
        better = err_try < err[idx]
        # secant update of the Jacobian where the step carried information
        denom = np.sum(dv * dv, axis=0)
        ok = better & (denom > 0)
        corr = (r_try - r[:, idx]) - np.einsum("nij,jn->in", Ja, dv)
        upd = np.einsum("in,jn->nij", corr, dv) / np.where(ok, denom, 1.0)[:, None, None]
        J[idx] = Ja + np.where(ok[:, None, None], upd, 0.0)
        acc = idx[better]
        v[:, acc] = v_try[:, better]
        y[:, acc] = y_try[:, better]
        S[acc] = S_try[better]
        r[:, acc] = r_try[:, better]
        err[acc] = err_try[better]
        # a trajectory that stops improving is frozen; a stall above tol fails the final check
        active[idx[~better]] = False
        active[acc] = err[acc] > floor[acc]
        it += 1
    res = float(np.max(err)) if n else 0.0
    if not res < tol:
        raise NoTrajectory(f"shooting did not converge: residual {res:.3g} after {it} iterations")
    p_t, p_x = _momenta(fields, m, q, y)
    # first-order correction of the action to the exact endpoints
    S = S - (p_t * r[0] + p_x * r[1])
    return ShootingResult(v, S, (p_t, p_x), y[2:].copy(), it, res)


@dataclass
class VanVleckResult:
    kernel: np.ndarray
    determinant: np.ndarray
    action: np.ndarray
    iterations: int = 0
    extras: dict = field(default_factory=dict)


def van_vleck_batch(
    m: float,
    q: float,
    fields: FieldConfig,
    t1,
    x1,
    t2,
    x2,
    T1: float,
    T2: float,
    C: float = 1.0,
    h: float = VAN_VLECK_STEP,
    steps_per_segment: int = 16,
) -> VanVleckResult:
    """Vectorized ``C sqrt(-D) exp(i S)`` over broadcast endpoint arrays.

    ``D = det(-d2S / de1 de2)``. Each mixed derivative is a central difference, over
    endpoint displacements ``h`` of ``e1``, of the final canonical momentum
    ``dS/de2 = (-m tdot - q phi, m xdot + q A_x)``. This equals the mixed second difference
    of ``S`` but avoids the rounding of differencing large actions twice. The potential
    terms are evaluated at the fixed ``e2`` and cancel from the difference, so only the
    mechanical parts ``(-m tdot, m xdot)`` are differenced.
    The root takes the principal branch of ``sqrt(-D)``; for the free kernel ``-D = (m/dT)^2``.
    """
    t1, x1, t2, x2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t1, x1, t2, x2)))
    shape = t1.shape
    s = np.vstack([t1.ravel(), x1.ravel()])
    e = np.vstack([t2.ravel(), x2.ravel()])
    n = s.shape[1]
    offsets = [(0.0, 0.0), (h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)]
    starts = np.hstack([s + np.array(o)[:, None] for o in offsets])
    targets = np.hstack([e] * len(offsets))
    sh = shoot(fields, m, q, T1, T2, starts, targets, steps_per_segment=steps_per_segment)
    pt = (-m * sh.final_velocity[0]).reshape(len(offsets), n)
    px = (m * sh.final_velocity[1]).reshape(len(offsets), n)
    S = sh.action[:n]
    # mixed derivatives d p2_j / d e1_i
    d_t1 = ((pt[1] - pt[2]) / (2 * h), (px[1] - px[2]) / (2 * h))
    d_x1 = ((pt[3] - pt[4]) / (2 * h), (px[3] - px[4]) / (2 * h))
    # matrix -d2S/de1_i de2_j with i,j in (t, x)
    M_tt, M_tx = -d_t1[0], -d_t1[1]
    M_xt, M_xx = -d_x1[0], -d_x1[1]
    D = M_tt * M_xx - M_tx * M_xt
    if np.any(np.abs(D) > CAUSTIC_LIMIT) or not np.all(np.isfinite(D)):
        raise CausticError("van Vleck determinant exceeds 1e12")
    K = C * np.sqrt((-D).astype(complex)) * np.exp(1j * S)
    return VanVleckResult(K.reshape(shape), D.reshape(shape), S.reshape(shape), sh.iterations)


def van_vleck_kernel(m: float, q: float, fields: FieldConfig, e1: Event, e2: Event, T1: float, T2: float, C: float = 1.0) -> complex:
    """Semiclassical kernel from ``e1`` at ``T1`` to ``e2`` at ``T2``.

    ``C`` is left to the caller; ``FREE_VAN_VLECK_CONSTANT`` reproduces ``free_kernel_4d``.
    """
    r = van_vleck_batch(m, q, fields, e1.t, e1.x, e2.t, e2.x, T1, T2, C=C)
    return complex(r.kernel)


def van_vleck_determinant(m: float, q: float, fields: FieldConfig, e1: Event, e2: Event, T1: float, T2: float) -> float:
    return float(van_vleck_batch(m, q, fields, e1.t, e1.x, e2.t, e2.x, T1, T2).determinant)
