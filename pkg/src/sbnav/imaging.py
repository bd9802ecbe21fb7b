"""Synthetic images of a sunlit triaxial ellipsoid and gradient limb detection.

Images are produced by casting one ray per pixel through a pinhole camera and
intersecting it with the (possibly rotating) ellipsoid.  Shading is pure
Lambertian with the Sun along Hill ``-x``; the background is black.  An
optional Gaussian point-spread function models the smoothing introduced by
resampling a rasterized frame to the sensor size.

Camera frame convention: boresight ``+z``, image ``u`` (columns) along ``+x``,
image ``v`` (rows) along ``+y`` (down).  Pixel ``(row i, col j)`` has image
coordinates ``(j + 0.5, i + 0.5)`` so the principal point ``S/2`` sits on the
optical axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter
from scipy.spatial.transform import Rotation

from sbnav import kernels
from sbnav.dynamics import BodyParams

SUN_HILL = np.array([-1.0, 0.0, 0.0])  # unit vector toward the Sun


class GeometryError(ValueError):
    """Camera placement incompatible with the body (e.g. inside it)."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fov_deg: float = 30.0
    S: int = 1000
    alpha_skew: float = 0.0
    dx: float = 1.0
    dy: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError("fov must lie in (0, 180) degrees")
        if int(self.S) != self.S or self.S < 2:
            raise ValueError("image size S must be an integer >= 2")

    @property
    def focal(self) -> float:
        """Focal length in pixels."""
        return (self.S / 2.0) / np.tan(np.radians(self.fov_deg) / 2.0)

    @property
    def u_p(self) -> float:
        return self.S / 2.0

    @property
    def v_p(self) -> float:
        return self.S / 2.0


@dataclass(frozen=True)
class CameraPose:
    """Camera position (Hill, km) with boresight and up directions."""

    position: np.ndarray
    boresight: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        for name in ("position", "boresight", "up"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if abs(np.linalg.norm(self.boresight) - 1.0) > 1e-12 or abs(np.linalg.norm(self.up) - 1.0) > 1e-12:
            raise ValueError("boresight and up must be unit vectors")
        if abs(self.boresight @ self.up) > 1e-9:
            raise ValueError("up must be orthogonal to the boresight")

    @classmethod
    def nadir(cls, position) -> "CameraPose":
        """Pose at ``position`` looking at the body center.

        ``up`` is Hill ``z`` projected onto the image plane, or Hill ``y``
        when the boresight is (anti)parallel to ``z``.
        """
        position = np.asarray(position, dtype=float)
        rn = np.linalg.norm(position)
        if not rn > 0:
            raise GeometryError("camera at the body center")
        bore = -position / rn
        for ref in (np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0])):
            up = ref - (ref @ bore) * bore
            if np.linalg.norm(up) > 1e-6:
                break
        up /= np.linalg.norm(up)
        up -= (up @ bore) * bore
        return cls(position, bore, up / np.linalg.norm(up))

    @property
    def hill_from_camera(self) -> np.ndarray:
        """Rotation taking camera-frame vectors to Hill axes (columns = camera axes)."""
        z = self.boresight
        y = -self.up
        x = np.cross(y, z)
        return np.column_stack([x, y, z])


@dataclass
class GrayImage:
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise ValueError("image data must be 2-D")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass
class LimbPointSet:
    """Detected limb pixels as homogeneous columns ``[u, v, 1]`` (stored row-wise)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.points = pts

    @classmethod
    def from_uv(cls, uv) -> "LimbPointSet":
        uv = np.asarray(uv, dtype=float).reshape(-1, 2)
        return cls(np.column_stack([uv, np.ones(len(uv))]))

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def uv(self) -> np.ndarray:
        return self.points[:, :2]

    def __len__(self):
        return self.count


def rotation_about(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return Rotation.from_rotvec(angle * axis / np.linalg.norm(axis)).as_matrix()


def body_rotation(params: BodyParams, t: float) -> np.ndarray:
    """Body-to-Hill rotation after ``t`` seconds of spin.

    The angle is ``360 deg * t / rotation_period`` about ``rotation_axis``;
    at ``t = 0`` the principal axes coincide with Hill axes.
    """
    theta = 2.0 * np.pi * (t / params.rotation_period)
    return rotation_about(params.rotation_axis, theta)


@dataclass(frozen=True)
class RenderOptions:
    psf_sigma: float = 0.0  # px, Gaussian blur applied before noise
    rotating: bool = True
    full_frame_noise: bool = True


def _roi(position_body, cam_to_body, semi_axes, intr: CameraIntrinsics, pad):
    """Pixel bounding box (rows, cols) enclosing the projected body."""
    S = intr.S
    full = ((0, S), (0, S))
    d = np.linalg.norm(position_body)
    rmax = float(np.max(semi_axes))
    if d <= rmax * 1.0001:
        return full
    half = np.arcsin(rmax / d)
    axis = -position_body / d
    if half > np.radians(80.0):
        return full
    # circle of the bounding cone, mapped to pixels
    a = np.cross(axis, [1.0, 0.0, 0.0])
    if np.linalg.norm(a) < 1e-6:
        a = np.cross(axis, [0.0, 1.0, 0.0])
    a /= np.linalg.norm(a)
    b = np.cross(axis, a)
    ang = np.linspace(0.0, 2.0 * np.pi, 73)
    dirs = (np.cos(half) * axis[None, :]
            + np.sin(half) * (np.cos(ang)[:, None] * a + np.sin(ang)[:, None] * b))
    dc = dirs @ cam_to_body  # body -> camera
    if np.any(dc[:, 2] <= 1e-9):
        return full
    u = intr.focal * dc[:, 0] / dc[:, 2] + intr.u_p
    v = intr.focal * dc[:, 1] / dc[:, 2] + intr.v_p
    c0 = int(np.clip(np.floor(u.min()) - pad, 0, S))
    c1 = int(np.clip(np.ceil(u.max()) + pad, 0, S))
    r0 = int(np.clip(np.floor(v.min()) - pad, 0, S))
    r1 = int(np.clip(np.ceil(v.max()) + pad, 0, S))
    if c1 <= c0 or r1 <= r0:
        return (0, 0), (0, 0)
    return (r0, r1), (c0, c1)


def render_noiseless(body: BodyParams, pose: CameraPose, intr: CameraIntrinsics, t: float = 0.0,
                     options: RenderOptions = RenderOptions()):
    """Noise-free shading.  Returns ``(image array, (rows, cols) ROI)``."""
    rot = body_rotation(body, t) if options.rotating else np.eye(3)
    axes = body.semi_axes
    origin = rot.T @ pose.position
    if np.sum((origin / axes) ** 2) <= 1.0:
        raise GeometryError("camera inside the body")
    cam_to_body = rot.T @ pose.hill_from_camera
    sun = rot.T @ SUN_HILL
    pad = 3 + int(np.ceil(4.0 * options.psf_sigma))
    rows, cols = _roi(origin, cam_to_body, axes, intr, pad)
    img = np.zeros((intr.S, intr.S))
    if rows[1] > rows[0] and cols[1] > cols[0]:
        patch = kernels.shade_ellipsoid(np.array(rows), np.array(cols), origin, cam_to_body,
                                        float(intr.focal), float(intr.u_p), axes, sun)
        if options.psf_sigma > 0:
            patch = gaussian_filter(patch, options.psf_sigma, mode="constant")
        img[rows[0]:rows[1], cols[0]:cols[1]] = patch
    return img, (rows, cols)


def add_noise(img: GrayImage, sigma: float, rng_seed=None) -> GrayImage:
    """Add i.i.d. Gaussian noise and clamp to ``[0, 1]``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    data = np.asarray(img.data if isinstance(img, GrayImage) else img, dtype=float)
    if sigma == 0:
        return GrayImage(np.clip(data, 0.0, 1.0))
    rng = np.random.default_rng(rng_seed)
    return GrayImage(np.clip(data + sigma * rng.standard_normal(data.shape), 0.0, 1.0))


def render(body: BodyParams, pose: CameraPose, intrinsics: CameraIntrinsics = CameraIntrinsics(),
           t: float = 0.0, noise_sigma: float = 0.01, rng_seed=None,
           options: RenderOptions = RenderOptions()) -> GrayImage:
    """Full-frame grayscale image of the body seen from ``pose``."""
    img, _ = render_noiseless(body, pose, intrinsics, t, options)
    return add_noise(GrayImage(img), noise_sigma, rng_seed)


def detect_edges(img: GrayImage, rel_threshold: float = 0.4, abs_min_gradient: float = 0.1,
                 offset=(0, 0)) -> LimbPointSet:
    """Pixels whose gradient magnitude exceeds ``max(rel * max_grad, abs_min)``.

    ``offset`` = (row, col) of ``img`` inside a larger frame, for crops.
    """
    if not 0.0 < rel_threshold <= 1.0:
        raise ValueError("rel_threshold must lie in (0, 1]")
    data = np.ascontiguousarray(img.data if isinstance(img, GrayImage) else img, dtype=float)
    if data.size == 0:
        return LimbPointSet(np.empty((0, 3)))
    g = kernels.gradient_magnitude(data)
    thr = max(rel_threshold * g.max(), abs_min_gradient)
    rows, cols = np.nonzero(g > thr)
    uv = np.column_stack([cols + 0.5 + offset[1], rows + 0.5 + offset[0]])
    return LimbPointSet.from_uv(uv)


def write_pgm(path, img: GrayImage) -> Path:
    """8-bit binary PGM (P5)."""
    data = img.data if isinstance(img, GrayImage) else np.asarray(img)
    path = Path(path)
    Image.fromarray(np.round(np.clip(data, 0, 1) * 255).astype(np.uint8)).save(path, format="PPM")
    return path


def read_pgm(path) -> GrayImage:
    with Image.open(path) as im:
        return GrayImage(np.asarray(im.convert("L"), dtype=float) / 255.0)
