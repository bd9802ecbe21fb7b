"""Horizon-based optical navigation with an analytical-style covariance.

Limb pixels are turned into lines of sight, mapped into the space where the
ellipsoid becomes the unit sphere, and fitted by linear least squares
without iteration.  The covariance is the first-order propagation of an
isotropic pixel noise through the numerical Jacobian of that fit.

Sign convention: :func:`cra_position` returns the position of the body
center relative to the spacecraft, resolved in the camera frame.  Hill-frame
measurements handed to the filter are spacecraft-minus-body, i.e. the
negation of that vector rotated to Hill axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage.measure import EllipseModel

from sbnav import kernels
from sbnav.dynamics import BodyParams
from sbnav.imaging import (CameraIntrinsics, CameraPose, GrayImage, LimbPointSet,
                           RenderOptions, add_noise, body_rotation, detect_edges,
                           render_noiseless)


class OpNavError(ValueError):
    """Base class for limb-fit failures."""


class DegenerateLimbError(OpNavError):
    pass


class InfeasibleGeometryError(OpNavError):
    pass


def inverse_camera_matrix(intr: CameraIntrinsics) -> np.ndarray:
    """Inverse calibration matrix built from pixel densities, skew and principal point."""
    dx, dy, al = intr.dx, intr.dy, intr.alpha_skew
    if dx == 0 or dy == 0:
        raise ValueError("pixel densities must be non-zero")
    up, vp = intr.u_p, intr.v_p
    return np.array([
        [1.0 / dx, -al / (dx * dy), (al * vp - dy * up) / (dx * dy)],
        [0.0, 1.0 / dy, -vp / dy],
        [0.0, 0.0, 1.0],
    ])


def line_of_sight_matrix(intr: CameraIntrinsics) -> np.ndarray:
    """Pixel ``[u, v, 1]`` to camera-frame ray, with focal length applied."""
    f = intr.focal
    return np.diag([1.0 / f, 1.0 / f, 1.0]) @ inverse_camera_matrix(intr)


@dataclass(frozen=True)
class ShapeMatrix:
    semi_axes: tuple

    def __post_init__(self):
        ax = np.asarray(self.semi_axes, dtype=float)
        if ax.shape != (3,) or np.any(ax <= 0):
            raise ValueError("three positive semi-axes required")
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in ax))

    @classmethod
    def from_body(cls, body: BodyParams) -> "ShapeMatrix":
        return cls(tuple(body.semi_axes))

    @property
    def A(self):
        return np.diag(1.0 / np.asarray(self.semi_axes) ** 2)

    @property
    def D(self):
        return np.diag(1.0 / np.asarray(self.semi_axes))

    @property
    def D_inv(self):
        return np.diag(np.asarray(self.semi_axes))


def _sphere_maps(attitude, shape: ShapeMatrix):
    to_sphere = shape.D @ np.asarray(attitude, dtype=float).T
    from_sphere = np.asarray(attitude, dtype=float) @ shape.D_inv
    return to_sphere, from_sphere


def cra_position(limb: LimbPointSet, C_inv, attitude, shape: ShapeMatrix) -> np.ndarray:
    """Body-center position relative to the camera, camera frame (km).

    ``C_inv`` maps homogeneous pixels to camera rays (use
    :func:`line_of_sight_matrix`); ``attitude`` rotates body vectors into the
    camera frame.
    """
    pts = np.asarray(limb.points if isinstance(limb, LimbPointSet) else limb, dtype=float)
    if len(pts) < 3:
        raise DegenerateLimbError(f"need at least 3 limb points, got {len(pts)}")
    s = pts @ np.asarray(C_inv, dtype=float).T
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    to_sphere, from_sphere = _sphere_maps(attitude, shape)
    sb = s @ to_sphere.T
    sb /= np.linalg.norm(sb, axis=1, keepdims=True)
    m = sb.T @ sb
    if np.linalg.cond(m) > 1e14:
        raise DegenerateLimbError("limb directions are (nearly) coplanar through the origin")
    n = np.linalg.solve(m, sb.sum(axis=0))
    nn = n @ n
    if nn <= 1.0:
        raise InfeasibleGeometryError("fit places the observer inside the body")
    return from_sphere @ (n / np.sqrt(nn - 1.0))


def _ellipse_radius(model: EllipseModel, center, dirs):
    xc, yc, a, b, th = model.params
    c, s = np.cos(th), np.sin(th)
    rot = np.array([[c, s], [-s, c]])
    q0 = rot @ (np.asarray(center) - [xc, yc])
    qd = dirs @ rot.T
    w = np.array([1.0 / a ** 2, 1.0 / b ** 2])
    qa = (qd * qd) @ w
    qb = 2.0 * (qd * q0) @ w
    qc = (q0 * q0) @ w - 1.0
    disc = qb * qb - 4.0 * qa * qc
    with np.errstate(invalid="ignore"):
        return (-qb + np.sqrt(disc)) / (2.0 * qa)


def estimate_sigma_pix(limb: LimbPointSet, center=None) -> float:
    """Pixel scatter of the limb about its best-fit ellipse.

    Radii are taken about ``center`` (default: the fitted ellipse center),
    divided by the fitted-ellipse radius in the same direction, and the spread
    of that ratio is rescaled to pixels with the mean fitted radius.  An
    off-center origin such as the limb centroid makes the rays oblique to a
    partial arc and roughly doubles the estimate.
    """
    uv = limb.uv if isinstance(limb, LimbPointSet) else np.asarray(limb, dtype=float)[:, :2]
    if len(uv) < 5:
        raise DegenerateLimbError("need at least 5 points for an ellipse fit")
    model = EllipseModel()
    if not model.estimate(uv) or not np.all(np.isfinite(model.params)) or min(model.params[2:4]) <= 0:
        raise DegenerateLimbError("ellipse fit failed")
    if center is None:
        center = np.asarray(model.params[:2], dtype=float)
    rel = uv - np.asarray(center, dtype=float)
    rad = np.linalg.norm(rel, axis=1)
    if np.any(rad == 0):
        keep = rad > 0
        rel, rad = rel[keep], rad[keep]
    rfit = _ellipse_radius(model, center, rel / rad[:, None])
    if not np.all(np.isfinite(rfit)) or np.any(rfit <= 0):
        raise DegenerateLimbError("limb centroid lies outside the fitted ellipse")
    ratio = rad / rfit
    return float(np.std(ratio) * np.mean(rfit))


def measurement_covariance(limb: LimbPointSet, C_inv, attitude, shape: ShapeMatrix,
                           sigma_pix: float, step: float = 0.01) -> np.ndarray:
    """``sigma_pix^2 J J^T`` with ``J`` the central-difference pixel Jacobian."""
    pts = np.asarray(limb.points if isinstance(limb, LimbPointSet) else limb, dtype=float)
    to_sphere, from_sphere = _sphere_maps(attitude, shape)
    jac = kernels.limb_jacobian(np.ascontiguousarray(pts[:, :2]), np.asarray(C_inv, dtype=float),
                                to_sphere, from_sphere, float(step))
    r = sigma_pix ** 2 * (jac @ jac.T)
    return 0.5 * (r + r.T)


@dataclass(frozen=True)
class MeasurementConfig:
    noise_sigma: float = 0.01
    rel_threshold: float = 0.4
    abs_min_gradient: float = 0.1
    min_points: int = 10
    psf_sigma: float = 1.1
    rotating: bool = True
    sigma_pix_floor: float = 0.1
    fd_step: float = 0.01
    # render noise only around the body when background pixels provably
    # cannot reach the gradient floor
    crop: bool = True

    @property
    def render_options(self):
        return RenderOptions(psf_sigma=self.psf_sigma, rotating=self.rotating)


@dataclass
class OpNavMeasurement:
    z: np.ndarray            # body center relative to spacecraft, camera frame (km)
    R: np.ndarray            # camera-frame covariance (km^2)
    sigma_pix: float
    n_points: int
    hill_from_camera: np.ndarray = field(repr=False, default_factory=lambda: np.eye(3))
    valid: bool = True

    @property
    def position_hill(self) -> np.ndarray:
        """Spacecraft position relative to the body, Hill axes (km)."""
        return -(self.hill_from_camera @ self.z)

    @property
    def R_hill(self) -> np.ndarray:
        r = self.hill_from_camera @ self.R @ self.hill_from_camera.T
        return 0.5 * (r + r.T)

    @property
    def bound_3sigma(self) -> float:
        return 3.0 * float(np.sqrt(max(np.linalg.eigvalsh(self.R)[-1], 0.0)))


@dataclass
class InvalidMeasurement:
    reason: str
    n_points: int = 0
    valid: bool = False


def _noisy_crop(body, pose, intr, t, cfg: MeasurementConfig, seed):
    img, (rows, cols) = render_noiseless(body, pose, intr, t, cfg.render_options)
    # background gradient is at most ~sigma * 4 after clamping; keep a margin
    if cfg.crop and cfg.noise_sigma * 6.0 < cfg.abs_min_gradient:
        if rows[1] <= rows[0]:
            return np.zeros((0, 0)), (0, 0)
        r0, r1 = max(rows[0] - 1, 0), min(rows[1] + 1, intr.S)
        c0, c1 = max(cols[0] - 1, 0), min(cols[1] + 1, intr.S)
        patch = add_noise(GrayImage(img[r0:r1, c0:c1]), cfg.noise_sigma, seed).data
        return patch, (r0, c0)
    return add_noise(GrayImage(img), cfg.noise_sigma, seed).data, (0, 0)


def measure_from_limb(limb: LimbPointSet, pose: CameraPose, body: BodyParams, intr: CameraIntrinsics,
                      t: float, cfg: MeasurementConfig = MeasurementConfig()):
    if limb.count < max(cfg.min_points, 3):
        return InvalidMeasurement("too few limb points", limb.count)
    rot = body_rotation(body, t) if cfg.rotating else np.eye(3)
    attitude = pose.hill_from_camera.T @ rot  # body -> camera
    shape = ShapeMatrix.from_body(body)
    cinv = line_of_sight_matrix(intr)
    try:
        z = cra_position(limb, cinv, attitude, shape)
    except OpNavError as exc:
        return InvalidMeasurement(str(exc), limb.count)
    try:
        sig = max(estimate_sigma_pix(limb), cfg.sigma_pix_floor)
    except OpNavError:
        sig = cfg.sigma_pix_floor
    R = measurement_covariance(limb, cinv, attitude, shape, sig, cfg.fd_step)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(R))):
        return InvalidMeasurement("non-finite fit", limb.count)
    return OpNavMeasurement(z, R, sig, limb.count, pose.hill_from_camera)


def measure(position_km, body: BodyParams, intr: CameraIntrinsics = CameraIntrinsics(), t: float = 0.0,
            noise_seed=None, cfg: MeasurementConfig = MeasurementConfig()):
    """Nadir image from ``position_km`` (Hill) to position measurement, or Invalid."""
    pose = CameraPose.nadir(position_km)
    data, (r0, c0) = _noisy_crop(body, pose, intr, t, cfg, noise_seed)
    limb = detect_edges(data, cfg.rel_threshold, cfg.abs_min_gradient, offset=(r0, c0))
    return measure_from_limb(limb, pose, body, intr, t, cfg)
