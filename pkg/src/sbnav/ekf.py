"""Extended Kalman filter on the Hill-frame position/velocity state.

The filter runs in normalized Hill units (see :class:`sbnav.dynamics.Normalization`);
conversion helpers take and return km and km/s.  Prediction uses the same
RK4 propagator as the truth model together with ``F = I + A dt`` over short
sub-steps; the process noise is added once per prediction call.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from sbnav import kernels
from sbnav.dynamics import BodyParams, DynamicsError, PropagationError, srp_beta

log = logging.getLogger(__name__)

H = np.hstack([np.eye(3), np.zeros((3, 3))])


class FilterError(RuntimeError):
    pass


def _sym(p):
    return 0.5 * (p + p.T)


@dataclass(frozen=True)
class FilterState:
    x_hat: np.ndarray  # normalized [r; v]
    P: np.ndarray      # normalized covariance
    t: float = 0.0     # s

    def __post_init__(self):
        object.__setattr__(self, "x_hat", np.asarray(self.x_hat, dtype=float).copy())
        object.__setattr__(self, "P", _sym(np.asarray(self.P, dtype=float)))

    @classmethod
    def from_km(cls, x_km, P_km, params: BodyParams, t: float = 0.0) -> "FilterState":
        nd = params.norm
        scale = np.r_[np.full(3, nd.length), np.full(3, nd.velocity)]
        return cls(nd.state_to_nd(x_km), np.asarray(P_km) / np.outer(scale, scale), t)

    def to_km(self, params: BodyParams):
        nd = params.norm
        scale = np.r_[np.full(3, nd.length), np.full(3, nd.velocity)]
        return nd.state_to_dim(self.x_hat), self.P * np.outer(scale, scale)


@dataclass(frozen=True)
class NoiseConfig:
    """Process noise (km^2, (km/s)^2) and an optional measurement floor (km^2)."""

    Q: np.ndarray = None
    R_floor: float = 0.0

    def __post_init__(self):
        q = np.diag([1e-3] * 3 + [1e-6] * 3) if self.Q is None else np.asarray(self.Q, dtype=float)
        if q.shape != (6, 6) or np.min(np.linalg.eigvalsh(_sym(q))) < -1e-15:
            raise ValueError("Q must be a 6x6 PSD matrix")
        object.__setattr__(self, "Q", q)

    def Q_nd(self, params: BodyParams):
        nd = params.norm
        scale = np.r_[np.full(3, nd.length), np.full(3, nd.velocity)]
        return self.Q / np.outer(scale, scale)


def jacobian_F(x, dt, exact=False):
    """Discrete transition ``I + A dt`` (or ``expm(A dt)``) at normalized state ``x``."""
    x = np.asarray(x, dtype=float)
    if not np.linalg.norm(x[:3]) > 0:
        raise DynamicsError("singular position |r| = 0")
    a = kernels.anh3bp_jacobian(x, np.array([1.0, 1.0]))
    if exact:
        from scipy.linalg import expm
        return expm(a * dt)
    return np.eye(6) + a * dt


def predict(fs: FilterState, u, dt_s: float, params: BodyParams, noise: NoiseConfig = NoiseConfig(),
            substep_s: float = 60.0, add_process_noise: bool = True, model=(1.0, 1.0)) -> FilterState:
    """Propagate ``x_hat`` and ``P`` over ``dt_s`` seconds with constant control ``u`` (normalized)."""
    if not dt_s > 0:
        raise ValueError("dt must be positive")
    nd = params.norm
    beta = srp_beta(params)[0]
    n = max(1, int(np.ceil(dt_s / substep_s - 1e-9)))
    h = dt_s / nd.time / n
    x, p = kernels.rk4_cov(fs.x_hat, fs.P, float(beta), np.asarray(u, dtype=float),
                           np.asarray(model, dtype=float), h, n)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
        raise PropagationError("filter propagation produced non-finite values", fs.t, fs.x_hat)
    if add_process_noise:
        p = p + noise.Q_nd(params)
    return FilterState(x, _sym(p), fs.t + dt_s)


def update(fs: FilterState, z_nd, R_nd) -> tuple[FilterState, bool]:
    """Joseph-form position update.  Returns ``(state, applied)``."""
    z = np.asarray(z_nd, dtype=float)
    R = _sym(np.asarray(R_nd, dtype=float))
    s = H @ fs.P @ H.T + R
    try:
        c = np.linalg.cholesky(_sym(s))
    except np.linalg.LinAlgError:
        log.warning("innovation covariance not positive definite at t=%.1f s; update skipped", fs.t)
        return fs, False
    pht = fs.P @ H.T
    k = np.linalg.solve(c.T, np.linalg.solve(c, pht.T)).T
    x = fs.x_hat + k @ (z - fs.x_hat[:3])
    ikh = np.eye(6) - k @ H
    p = ikh @ fs.P @ ikh.T + k @ R @ k.T
    return replace(fs, x_hat=x, P=_sym(p)), True


def error_bound(P_pos) -> float:
    """``3 sqrt(lambda_max)`` of a 3x3 position covariance (or the 6x6 full one)."""
    p = np.asarray(P_pos, dtype=float)
    if p.shape == (6, 6):
        p = p[:3, :3]
    lam = np.linalg.eigvalsh(_sym(p))[-1]
    return 3.0 * float(np.sqrt(max(lam, 0.0)))
