"""Lyapunov feedback on Milankovitch slow elements with exponential penalties.

All quantities are normalized Hill units (``mu = 1``); the saturation limit
is given in m/s^2 and converted with :attr:`ControllerConfig.accel_unit`.

The law drives ``dx = [h; e] - [h*; e*]`` with ``V = dx^T K dx``, augmented
to ``V_hat = V (1 + sum w_i P_i)`` with ``P_i = exp(k_i g_i)``.  Writing the
rate of ``V_hat`` under ``d[h; e]/dt = B_slow u`` as ``dx^T L u`` and
requiring ``dx^T L u = -dx^T dx`` gives the least-squares control
``u = -(L^T L)^{-1} L^T dx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from sbnav.dynamics import DynamicsError, bennu, control_matrix


@dataclass(frozen=True)
class ConstraintParams:
    r_min: float                 # normalized length
    r_max: float                 # normalized length
    alpha: float = np.radians(30.0)
    weights: tuple = (1.0, 1.0, 10.0)
    sharpness: tuple = (1.0, 1.0, 1.0)
    eps: float = 0.0             # activation offset, g -> g + eps
    exp_ceiling: float = 50.0    # clamp on k*g before exponentiating
    g2_form: str = "apoapsis"    # or "printed": same (1 + e) denominator as g1

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if not 0 < self.alpha < np.pi / 2:
            raise ValueError("alpha must lie in (0, pi/2)")
        if len(self.weights) != 3 or len(self.sharpness) != 3:
            raise ValueError("three weights and three sharpness values required")
        if min(self.weights) < 0 or min(self.sharpness) <= 0:
            raise ValueError("weights must be >= 0 and sharpness > 0")
        if self.g2_form not in ("apoapsis", "printed"):
            raise ValueError("g2_form must be 'apoapsis' or 'printed'")

    @classmethod
    def from_body(cls, length_unit: float, radius_km: float, **kw) -> "ConstraintParams":
        """``r_min = 2 R``, ``r_max = 25 R`` for a body of radius ``radius_km``."""
        return cls(2.0 * radius_km / length_unit, 25.0 * radius_km / length_unit, **kw)

    def unconstrained(self) -> "ConstraintParams":
        """Same limits with the cone weight switched off."""
        w = tuple(self.weights)
        return replace(self, weights=(w[0], w[1], 0.0))


def _default_accel_unit():
    return bennu().norm.accel * 1e3


@dataclass(frozen=True)
class ControllerConfig:
    K: np.ndarray
    target: np.ndarray                 # [h*; e*], normalized
    u_max: float = 1e-5                # m/s^2
    mu: float = 1.0
    accel_unit: float = field(default_factory=_default_accel_unit)  # m/s^2 per normalized unit
    gradient_mode: str = "finite_difference"
    cond_limit: float = 1e12

    def __post_init__(self):
        k = np.asarray(self.K, dtype=float)
        if k.ndim == 1:
            k = np.diag(k)
        if k.shape != (6, 6) or not np.allclose(k, k.T) or np.linalg.eigvalsh(k)[0] <= 0:
            raise ValueError("K must be symmetric positive definite (6x6)")
        object.__setattr__(self, "K", k)
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).reshape(6))
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")
        if self.gradient_mode not in ("finite_difference", "analytic"):
            raise ValueError("gradient_mode must be 'finite_difference' or 'analytic'")

    @property
    def u_max_nd(self):
        return self.u_max / self.accel_unit


@dataclass
class ControlOutput:
    u: np.ndarray        # normalized acceleration, Hill axes
    V: float
    V_hat: float
    g: np.ndarray
    P: np.ndarray
    saturated: bool
    damped: bool = False


def constraints_g(x_slow, cp: ConstraintParams, mu: float = 1.0) -> np.ndarray:
    """``(g1, g2, g3)``; non-positive means satisfied."""
    x = np.asarray(x_slow, dtype=float)
    h, e = x[:3], x[3:]
    hn = np.linalg.norm(h)
    en = np.linalg.norm(e)
    if not hn > 0:
        raise DynamicsError("|h| must be positive")
    p = hn * hn / mu
    g1 = cp.r_min ** 2 - p / (1.0 + en)
    if cp.g2_form == "printed":
        g2 = p / (1.0 + en) - cp.r_max ** 2
    elif en >= 1.0:
        raise DynamicsError("apoapsis constraint needs a bound orbit (|e| < 1)")
    else:
        g2 = p / (1.0 - en) - cp.r_max ** 2
    g3 = np.cos(np.pi / 2 + cp.alpha) - h[0] / hn
    return np.array([g1, g2, g3]) + cp.eps


def _fd_steps(x, rel):
    x = np.asarray(x, dtype=float)
    scale = np.empty(6)
    scale[:3] = max(np.linalg.norm(x[:3]), 1e-12)
    scale[3:] = max(np.linalg.norm(x[3:]), 1e-3)
    return rel * np.maximum(np.abs(x), scale)


def constraint_gradients(x_slow, cp: ConstraintParams, mu: float = 1.0,
                         mode: str = "finite_difference", rel_step: float = 1e-7) -> np.ndarray:
    """3x6 Jacobian of :func:`constraints_g` with respect to ``[h; e]``.

    ``analytic`` returns the closed-form partials in their published form;
    they do not match the implemented constraints and are kept only so the
    discrepancy can be reported.
    """
    x = np.asarray(x_slow, dtype=float)
    if mode == "analytic":
        return analytic_gradients_published(x, mu)
    if mode != "finite_difference":
        raise ValueError(f"unknown gradient mode {mode!r}")
    steps = _fd_steps(x, rel_step)
    jac = np.empty((3, 6))
    for j in range(6):
        dx = np.zeros(6)
        dx[j] = steps[j]
        jac[:, j] = (constraints_g(x + dx, cp, mu) - constraints_g(x - dx, cp, mu)) / (2.0 * steps[j])
    return jac


def analytic_gradients_published(x_slow, mu: float = 1.0) -> np.ndarray:
    x = np.asarray(x_slow, dtype=float)
    h1, h2, h3 = x[:3]
    e = x[3:]
    hn = np.linalg.norm(x[:3])
    en = np.linalg.norm(e)
    row = np.empty(6)
    row[0] = -(2 * h1 + h2 ** 2 + h3 ** 2) / mu / (1 - en)
    row[1] = -(2 * h2 + h1 ** 2 + h3 ** 2) / mu / (1 - en)
    row[2] = -(2 * h3 + h2 ** 2 + h1 ** 2) / mu / (1 - en)
    with np.errstate(divide="ignore", invalid="ignore"):
        row[3:] = -e * hn ** 2 / (mu * en * (en - 1) ** 2)
    g3 = np.array([(h2 ** 2 + h3 ** 2), -h1 * h2, -h1 * h3, 0.0, 0.0, 0.0]) / hn ** 1.5
    return np.vstack([row, row, g3])


def gradient_discrepancy(states, cp: ConstraintParams, mu: float = 1.0) -> np.ndarray:
    """Per-state max |published - finite difference| for each constraint row.

    Returns an ``(n, 3)`` array; rows with undefined published values hold nan.
    """
    out = np.full((len(states), 3), np.nan)
    with np.errstate(all="ignore"):
        for i, x in enumerate(states):
            d = np.abs(analytic_gradients_published(x, mu) - constraint_gradients(x, cp, mu))
            out[i] = np.max(d, axis=1)
    return out


def penalty(g, k, ceiling: float = 50.0):
    """``exp(k g)`` with the exponent clamped at ``ceiling``."""
    return np.exp(np.minimum(np.asarray(k) * np.asarray(g), ceiling))


def lyapunov_values(x_slow, cfg: ControllerConfig, cp: ConstraintParams):
    """``(V, V_hat, [w_i V P_i])``."""
    dx = np.asarray(x_slow, dtype=float) - cfg.target
    V = float(dx @ cfg.K @ dx)
    P = penalty(constraints_g(x_slow, cp, cfg.mu), np.asarray(cp.sharpness), cp.exp_ceiling)
    vp = np.asarray(cp.weights) * V * P
    return V, V + float(vp.sum()), vp


def control(x_slow, cfg: ControllerConfig, cp: ConstraintParams, r, v) -> ControlOutput:
    """Saturated penalty-augmented Lyapunov control.

    ``r`` and ``v`` are the normalized Hill position and *inertial* velocity
    used to evaluate the control-influence matrix.
    """
    x = np.asarray(x_slow, dtype=float)
    dx = x - cfg.target
    K = cfg.K
    g = constraints_g(x, cp, cfg.mu)
    k = np.asarray(cp.sharpness, dtype=float)
    w = np.asarray(cp.weights, dtype=float)
    P = penalty(g, k, cp.exp_ceiling)
    V = float(dx @ K @ dx)
    V_hat = V * (1.0 + float(w @ P))
    if not np.any(dx):
        return ControlOutput(np.zeros(3), V, V_hat, g, P, False)
    B = control_matrix(r, v, cfg.mu)[:6]
    grad = constraint_gradients(x, cp, cfg.mu, cfg.gradient_mode)
    dP = k * P
    M = 2.0 * (1.0 + float(w @ P)) * K + np.outer(K @ dx, (w * dP) @ grad)
    L = M @ B
    LtL = L.T @ L
    damped = False
    if np.linalg.cond(LtL) > cfg.cond_limit:
        LtL = LtL + 1e-9 * np.trace(LtL) * np.eye(3)
        damped = True
    u = -np.linalg.solve(LtL, L.T @ dx)
    un = np.linalg.norm(u)
    sat = bool(un > cfg.u_max_nd)
    if sat:
        u *= cfg.u_max_nd / un
    return ControlOutput(u, V, V_hat, g, P, sat, damped)
