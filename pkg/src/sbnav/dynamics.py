"""Augmented normalized Hill three-body dynamics near a small body.

Cartesian equations of motion in the rotating Hill frame (x from the Sun to
the body, z along the body's orbital angular velocity), the equivalent
Milankovitch-element form, frozen terminator orbits, and fixed-step RK4
propagation.  Internally everything runs in normalized units where the body
gravitational parameter and the Hill-frame rate are both 1.

Milankovitch elements here are the angular momentum and eccentricity vectors
of the *inertial* velocity ``v + Omega x r``, resolved on Hill axes; with that
choice the transport-theorem rates are exact (see :func:`milankovitch_rates`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from sbnav import kernels

HOUR = 3600.0
DAY = 86400.0


class DynamicsError(ValueError):
    """Invalid dynamical configuration or singular geometry."""


class PropagationError(RuntimeError):
    def __init__(self, message, last_time, last_state):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


@dataclass(frozen=True)
class BodyParams:
    """Physical parameters of the small body and spacecraft (km, s, kg, m)."""

    mu: float = 4.890e-9
    mu_sun: float = 1.327e11
    G1: float = 1.0e8
    m_over_A: float = 33.0
    R: float = 1.720e8
    radius: float = 0.241
    shape_ratios: tuple = (1.0, 1.0, 1.0)
    rotation_axis: tuple = (0.0, 0.0, -1.0)
    rotation_period: float = 4.296057 * HOUR

    def __post_init__(self):
        for name in ("mu", "mu_sun", "m_over_A", "R", "radius", "rotation_period"):
            if not getattr(self, name) > 0:
                raise DynamicsError(f"{name} must be positive")
        if self.G1 < 0:
            raise DynamicsError("G1 must be non-negative")
        a, b, c = self.shape_ratios
        if not (a >= b >= c > 0):
            raise DynamicsError("shape ratios must satisfy a >= b >= c > 0")
        axis = np.asarray(self.rotation_axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise DynamicsError("rotation axis must be a unit vector")

    @property
    def semi_axes(self) -> np.ndarray:
        """Principal semi-axes (km) of the volume-equivalent ellipsoid."""
        s = np.asarray(self.shape_ratios, dtype=float)
        return self.radius / np.prod(s) ** (1.0 / 3.0) * s

    @property
    def norm(self) -> "Normalization":
        return Normalization.from_params(self)


def bennu(**overrides) -> BodyParams:
    """Bennu-like parameter set used throughout the scenarios."""
    return BodyParams(**overrides)


class Normalization(NamedTuple):
    """Unit length (km) and unit time (s) of the normalized Hill problem."""

    length: float
    time: float

    @classmethod
    def from_params(cls, p: BodyParams) -> "Normalization":
        length = (p.mu / p.mu_sun) ** (1.0 / 3.0) * p.R
        time = 1.0 / np.sqrt(p.mu_sun / p.R ** 3)
        return cls(length, time)

    @property
    def velocity(self):
        return self.length / self.time

    @property
    def accel(self):
        return self.length / self.time ** 2

    def to_nd(self, r_km, v_kms=None):
        r = np.asarray(r_km, dtype=float) / self.length
        if v_kms is None:
            return r
        return r, np.asarray(v_kms, dtype=float) / self.velocity

    def to_dim(self, r_nd, v_nd=None):
        r = np.asarray(r_nd, dtype=float) * self.length
        if v_nd is None:
            return r
        return r, np.asarray(v_nd, dtype=float) * self.velocity

    def state_to_nd(self, x_dim):
        x = np.asarray(x_dim, dtype=float)
        return np.concatenate([x[..., :3] / self.length, x[..., 3:] / self.velocity], axis=-1)

    def state_to_dim(self, x_nd):
        x = np.asarray(x_nd, dtype=float)
        return np.concatenate([x[..., :3] * self.length, x[..., 3:] * self.velocity], axis=-1)

    def time_to_nd(self, t_s):
        return np.asarray(t_s, dtype=float) / self.time

    def time_to_dim(self, t_nd):
        return np.asarray(t_nd, dtype=float) * self.time


def srp_beta(params: BodyParams) -> tuple[float, float]:
    """SRP acceleration as ``(normalized, km/s^2)``."""
    p = params
    beta_dim = p.G1 / (p.m_over_A * p.R ** 2)
    beta_nd = p.G1 / (p.m_over_A * p.mu_sun ** (2.0 / 3.0) * p.mu ** (1.0 / 3.0))
    return beta_nd, beta_dim


def a_max(params: BodyParams) -> float:
    """Largest bounded semi-major axis (km) under SRP."""
    p = params
    if p.G1 <= 0:
        raise DynamicsError("a_max undefined without SRP")
    return np.sqrt(3.0) / 4.0 * np.sqrt(p.mu * p.m_over_A / p.G1) * p.R


def anh3bp_accel(r, v, beta, u=(0.0, 0.0, 0.0)):
    """Acceleration of the normalized Hill problem with SRP and control."""
    r = np.asarray(r, dtype=float)
    if not np.linalg.norm(r) > 0:
        raise DynamicsError("singular position |r| = 0")
    x = np.concatenate([r, np.asarray(v, dtype=float)])
    return kernels.anh3bp_rhs(x, float(beta), np.asarray(u, dtype=float),
                              np.array([1.0, 1.0]))[3:]


def anh3bp_jacobian(x):
    """6x6 continuous Jacobian of the Cartesian equations of motion."""
    x = np.asarray(x, dtype=float)
    if not np.linalg.norm(x[:3]) > 0:
        raise DynamicsError("singular position |r| = 0")
    return kernels.anh3bp_jacobian(x, np.array([1.0, 1.0]))


def solar_tide(r):
    """Solar tidal acceleration on Hill axes (normalized, inertial part)."""
    r = np.asarray(r, dtype=float)
    return np.array([2.0 * r[0], -r[1], -r[2]])


# ---------------------------------------------------------------------------
# Milankovitch elements
# ---------------------------------------------------------------------------

def skew(a):
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


@dataclass(frozen=True)
class MilankovitchState:
    h: np.ndarray
    e: np.ndarray
    L: float

    @property
    def slow(self):
        return np.concatenate([self.h, self.e])

    def as_array(self):
        return np.concatenate([self.h, self.e, [self.L]])


def true_longitude(r, h):
    """Angle of ``r`` in the orbit plane from the equinoctial reference axis.

    The reference direction is the image of Hill x under the rotation taking
    z to the orbit normal about the node line (the retrograde-singular
    equinoctial convention).
    """
    hhat = h / np.linalg.norm(h)
    f = np.array([1.0 - hhat[0] ** 2 / (1.0 + hhat[2]), -hhat[0] * hhat[1] / (1.0 + hhat[2]), -hhat[0]])
    g = np.cross(hhat, f)
    return float(np.arctan2(r @ g, r @ f) % (2.0 * np.pi))


def cart_to_milankovitch(r, v, mu=1.0) -> MilankovitchState:
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    h = np.cross(r, v)
    if not np.linalg.norm(h) > 0:
        raise DynamicsError("rectilinear orbit: |h| = 0")
    e = np.cross(v, h) / mu - r / np.linalg.norm(r)
    if 1.0 + h[2] / np.linalg.norm(h) < 1e-12:
        # reference direction undefined for retrograde-equatorial orbits
        return MilankovitchState(h, e, float("nan"))
    return MilankovitchState(h, e, true_longitude(r, h))


def milankovitch_to_cart(state: MilankovitchState, mu=1.0):
    h = np.asarray(state.h, dtype=float)
    e = np.asarray(state.e, dtype=float)
    hn = np.linalg.norm(h)
    hhat = h / hn
    if not np.isfinite(state.L) or 1.0 + hhat[2] < 1e-12:
        raise DynamicsError("true longitude undefined for h along -z")
    f = np.array([1.0 - hhat[0] ** 2 / (1.0 + hhat[2]), -hhat[0] * hhat[1] / (1.0 + hhat[2]), -hhat[0]])
    g = np.cross(hhat, f)
    rhat = np.cos(state.L) * f + np.sin(state.L) * g
    p = hn * hn / mu
    r = p / (1.0 + e @ rhat) * rhat
    # v x h = mu (e + rhat)  ->  v = mu/h^2 * h x (e + rhat)
    v = mu / hn ** 2 * np.cross(h, e + rhat)
    return r, v


def hill_to_milankovitch(r, v, omega=1.0, mu=1.0) -> MilankovitchState:
    """Elements of a Hill-frame state (inertial velocity ``v + Omega z x r``)."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    vi = v + omega * np.array([-r[1], r[0], 0.0])
    return cart_to_milankovitch(r, vi, mu)


def milankovitch_to_hill(state: MilankovitchState, omega=1.0, mu=1.0):
    r, vi = milankovitch_to_cart(state, mu)
    return r, vi - omega * np.array([-r[1], r[0], 0.0])


def control_matrix(r, v, mu=1.0):
    """7x3 Gauss control-influence matrix for (h, e, L)."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    h = np.cross(r, v)
    hn = np.linalg.norm(h)
    b = np.empty((7, 3))
    b[:3] = skew(r)
    b[3:6] = (skew(v) @ skew(r) - skew(h)) / mu
    denom = hn * (hn + h[2])
    if abs(denom) < 1e-300:
        raise DynamicsError("true-longitude rate singular (h + z.h = 0)")
    b[6] = r[2] / denom * h
    return b


def milankovitch_rates(state: MilankovitchState, r, v, a_d, omega=0.0, mu=1.0):
    """Rates of ``(h, e, L)`` on rotating axes under perturbation ``a_d``.

    ``r`` and ``v`` are the position and inertial velocity consistent with
    ``state``.  The frame rotation enters through ``-Omega x h`` and
    ``-Omega x e`` (transport theorem).
    """
    h = np.asarray(state.h, dtype=float)
    e = np.asarray(state.e, dtype=float)
    r = np.asarray(r, dtype=float)
    w = np.array([0.0, 0.0, omega])
    rate = control_matrix(r, v, mu) @ np.asarray(a_d, dtype=float)
    rate[:3] -= np.cross(w, h)
    rate[3:6] -= np.cross(w, e)
    hn = np.linalg.norm(h)
    rn = np.linalg.norm(r)
    # the longitude reference turns with the axes about z
    rate[6] += hn / rn ** 2 - omega
    return rate


def milankovitch_perturbation(r, beta, u=(0.0, 0.0, 0.0)):
    """Non-Keplerian inertial acceleration: SRP, solar tide and control."""
    return np.array([beta, 0.0, 0.0]) + solar_tide(r) + np.asarray(u, dtype=float)


# ---------------------------------------------------------------------------
# frozen terminator orbits
# ---------------------------------------------------------------------------

def fto_lambda(params: BodyParams, a_km: float) -> float:
    """SRP-strength angle of the frozen terminator orbit with semi-major axis ``a_km``.

    Balances the averaged SRP torque on ``h`` against the frame rotation,
    ``tan(Lambda) = 3 beta sqrt(a / mu) / (2 Omega)`` in normalized units.
    """
    beta = srp_beta(params)[0]
    a = a_km / params.norm.length
    return float(np.arctan2(3.0 * beta * np.sqrt(a), 2.0))


def fto_state(params: BodyParams | None, Lambda, sign=1, radius=None, mu=1.0, omega=1.0):
    """Hill-frame state (normalized) on a frozen terminator orbit.

    ``h/|h| = sign*x``, ``e/|e| = y~ (h/|h|)``, ``|e| = cos(Lambda)``.  The
    semi-latus rectum is ``radius`` (normalized; defaults to the 2.0429 km
    reference orbit when ``params`` is given).  The state is placed at the
    periapsis.
    """
    if not (0.0 < Lambda <= np.pi / 2):
        raise DynamicsError("Lambda must lie in (0, pi/2]")
    if sign not in (1, -1):
        raise DynamicsError("sign must be +1 or -1")
    if radius is None:
        if params is None:
            raise DynamicsError("radius or params required")
        radius = 2.0429 / params.norm.length
    ecc = np.cos(Lambda) if Lambda < np.pi / 2 else 0.0
    hhat = sign * np.array([1.0, 0.0, 0.0])
    ehat = np.cross([0.0, 1.0, 0.0], hhat)
    hn = np.sqrt(mu * radius)
    h = hn * hhat
    e = ecc * ehat
    if ecc == 0.0:
        # circular polar orbit: start on the +z crossing
        rhat = np.array([0.0, 0.0, 1.0])
    else:
        rhat = ehat
    r = radius / (1.0 + ecc) * rhat
    vi = mu / hn ** 2 * np.cross(h, e + rhat)
    v = vi - omega * np.array([-r[1], r[0], 0.0])
    return np.concatenate([r, v])


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray

    @property
    def final(self):
        return self.x[-1]


@dataclass
class IntegratorOptions:
    step: float = 60.0  # s, dimensional
    adaptive: bool = False
    rtol: float = 1e-10
    atol: float = 1e-13
    gravity: float = 1.0
    frame: float = 1.0

    @property
    def model(self):
        return np.array([self.gravity, self.frame])


def propagate_segment(x0, dt, beta, u=(0.0, 0.0, 0.0), h=None, model=(1.0, 1.0)):
    """RK4 over ``dt`` (normalized) with constant control; returns the state."""
    x0 = np.asarray(x0, dtype=float)
    if dt == 0:
        return x0.copy()
    h = abs(dt) if h is None else h
    n = max(1, int(np.ceil(abs(dt) / h - 1e-9)))
    return kernels.rk4(x0, float(beta), np.asarray(u, dtype=float),
                       np.asarray(model, dtype=float), dt / n, n)


def propagate(state, t_span, control_fn: Callable | None, params: BodyParams,
              opts: IntegratorOptions | None = None, n_out=None) -> Trajectory:
    """Propagate a normalized Hill state over ``t_span`` (normalized time).

    ``control_fn(t, x)`` returns a normalized control acceleration held
    constant over each output step (zero when ``None``).
    """
    opts = opts or IntegratorOptions()
    t0, t1 = map(float, t_span)
    if not (np.isfinite(t0) and np.isfinite(t1)):
        raise DynamicsError("t_span must be finite")
    beta = srp_beta(params)[0]
    nd = params.norm
    h = opts.step / nd.time
    x = np.asarray(state, dtype=float).copy()
    if n_out is None:
        n_out = max(1, int(np.ceil((t1 - t0) / h - 1e-9)))
    ts = np.linspace(t0, t1, n_out + 1)
    xs = np.empty((n_out + 1, 6))
    xs[0] = x
    model = opts.model
    for k in range(n_out):
        u = np.zeros(3) if control_fn is None else np.asarray(control_fn(ts[k], x), dtype=float)
        dt = ts[k + 1] - ts[k]
        if opts.adaptive:
            def rhs(_t, y, u=u):
                return kernels.anh3bp_rhs(y, beta, u, model)
            sol = solve_ivp(rhs, (0.0, dt), x, method="DOP853", rtol=opts.rtol, atol=opts.atol)
            if not sol.success:
                raise PropagationError(sol.message, ts[k], x)
            xn = sol.y[:, -1]
        else:
            xn = propagate_segment(x, dt, beta, u, h, model)
        if not np.all(np.isfinite(xn)):
            raise PropagationError("non-finite state", ts[k], x)
        x = xn
        xs[k + 1] = x
    return Trajectory(ts, xs)


# ---------------------------------------------------------------------------
# point-mass feasibility: J2 against SRP
# ---------------------------------------------------------------------------

def j2_feasibility_report(params: BodyParams, d_sat: float, mu: float | None = None) -> dict:
    """Compare the peak J2 acceleration at ``d_sat`` (km) with SRP and gravity."""
    if not d_sat > params.radius:
        raise DynamicsError("d_sat must exceed the body radius")
    mu = params.mu if mu is None else mu
    a, b, c = params.semi_axes
    ix = (b * b + c * c) / 5.0
    iy = (a * a + c * c) / 5.0
    iz = (a * a + b * b) / 5.0
    r_ref = params.radius
    j2 = (iz - 0.5 * (ix + iy)) / r_ref ** 2
    a_j2 = 3.0 * j2 * mu * r_ref ** 2 / d_sat ** 4
    beta_dim = srp_beta(params)[1]
    a_g = mu / d_sat ** 2
    return {
        "J2": j2,
        "a_J2_max": a_j2,
        "beta_dim": beta_dim,
        "a_g": a_g,
        "ratio_gravity": a_j2 / a_g,
        "ratio_srp": a_j2 / beta_dim,
    }
