"""Hot numeric kernels with numba and pure-numpy implementations.

Each kernel exists twice: a ``*_numpy`` version (vectorised numpy, or a plain
Python loop where the work is inherently sequential) and a ``*_numba`` version
compiled from an explicit loop body.  The unsuffixed names dispatch according
to :data:`sbnav._accel.USE_NUMBA` (set ``SBNAV_USE_NUMBA=0`` to force numpy).

All kernels work in the unit system of their caller; the dynamics kernels
assume normalized Hill units (gravitational parameter 1, frame rate 1).
"""

import math

import numpy as np

from sbnav._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# ray-cast shading of a Lambertian triaxial ellipsoid
# ---------------------------------------------------------------------------

def shade_ellipsoid_numpy(rows, cols, origin, cam_to_body, focal, center,
                          semi_axes, sun):
    """Shade pixels ``rows x cols`` (index ranges) of a pinhole camera.

    ``origin`` is the camera position in the body principal frame,
    ``cam_to_body`` rotates camera-frame vectors into that frame, ``sun`` is
    the unit direction toward the light source in the body frame.  Pixel
    ``(r, c)`` has image coordinates ``(c + 0.5, r + 0.5)``.
    """
    r0, r1 = rows
    c0, c1 = cols
    v = np.arange(r0, r1, dtype=float) + 0.5
    u = np.arange(c0, c1, dtype=float) + 0.5
    uu, vv = np.meshgrid(u, v)
    d_cam = np.stack([(uu - center) / focal, (vv - center) / focal,
                      np.ones_like(uu)], axis=-1)
    d = d_cam @ cam_to_body.T
    inv = 1.0 / np.asarray(semi_axes, dtype=float)
    od = origin * inv
    dd = d * inv
    qa = np.einsum("...i,...i->...", dd, dd)
    qb = 2.0 * dd @ od
    qc = od @ od - 1.0
    disc = qb * qb - 4.0 * qa * qc
    hit = disc >= 0.0
    t = np.where(hit, (-qb - np.sqrt(np.where(hit, disc, 0.0))) / (2.0 * qa), 0.0)
    hit &= t > 0.0
    p = origin + t[..., None] * d
    n = p * inv * inv
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    shade = np.clip(n @ sun, 0.0, None)
    return np.where(hit, shade, 0.0)


@njit
def shade_ellipsoid_numba(rows, cols, origin, cam_to_body, focal, center,
                          semi_axes, sun):
    r0, r1 = rows
    c0, c1 = cols
    out = np.zeros((r1 - r0, c1 - c0))
    ia = 1.0 / semi_axes[0]
    ib = 1.0 / semi_axes[1]
    ic = 1.0 / semi_axes[2]
    ox = origin[0] * ia
    oy = origin[1] * ib
    oz = origin[2] * ic
    qc = ox * ox + oy * oy + oz * oz - 1.0
    for i in range(r1 - r0):
        y = (r0 + i + 0.5 - center) / focal
        for j in range(c1 - c0):
            x = (c0 + j + 0.5 - center) / focal
            dx = cam_to_body[0, 0] * x + cam_to_body[0, 1] * y + cam_to_body[0, 2]
            dy = cam_to_body[1, 0] * x + cam_to_body[1, 1] * y + cam_to_body[1, 2]
            dz = cam_to_body[2, 0] * x + cam_to_body[2, 1] * y + cam_to_body[2, 2]
            ex = dx * ia
            ey = dy * ib
            ez = dz * ic
            qa = ex * ex + ey * ey + ez * ez
            qb = 2.0 * (ex * ox + ey * oy + ez * oz)
            disc = qb * qb - 4.0 * qa * qc
            if disc < 0.0:
                continue
            t = (-qb - math.sqrt(disc)) / (2.0 * qa)
            if t <= 0.0:
                continue
            px = origin[0] + t * dx
            py = origin[1] + t * dy
            pz = origin[2] + t * dz
            nx = px * ia * ia
            ny = py * ib * ib
            nz = pz * ic * ic
            nn = math.sqrt(nx * nx + ny * ny + nz * nz)
            s = (nx * sun[0] + ny * sun[1] + nz * sun[2]) / nn
            if s > 0.0:
                out[i, j] = s
    return out


# ---------------------------------------------------------------------------
# image gradient magnitude (central differences, one-sided at the border)
# ---------------------------------------------------------------------------

def gradient_magnitude_numpy(img):
    gy, gx = np.gradient(img)
    return np.hypot(gx, gy)


@njit
def gradient_magnitude_numba(img):
    h, w = img.shape
    out = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            if w == 1:
                gx = 0.0
            elif j == 0:
                gx = img[i, 1] - img[i, 0]
            elif j == w - 1:
                gx = img[i, w - 1] - img[i, w - 2]
            else:
                gx = 0.5 * (img[i, j + 1] - img[i, j - 1])
            if h == 1:
                gy = 0.0
            elif i == 0:
                gy = img[1, j] - img[0, j]
            elif i == h - 1:
                gy = img[h - 1, j] - img[h - 2, j]
            else:
                gy = 0.5 * (img[i + 1, j] - img[i - 1, j])
            out[i, j] = math.sqrt(gx * gx + gy * gy)
    return out


# ---------------------------------------------------------------------------
# limb-fit position and its finite-difference pixel Jacobian
# ---------------------------------------------------------------------------

def _transformed_los_numpy(pix, cinv, to_sphere):
    h = np.column_stack([pix, np.ones(len(pix))])
    s = h @ cinv.T
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    sb = s @ to_sphere.T
    return sb / np.linalg.norm(sb, axis=1, keepdims=True)


def limb_jacobian_numpy(pix, cinv, to_sphere, from_sphere, step):
    """Central-difference Jacobian of the limb-fit position w.r.t. pixels.

    Each perturbation changes a single row of the least-squares system, so the
    perturbed normal equations are rank-two updates of the nominal ones; all
    ``4n`` perturbed 3x3 systems are solved in one batch.  Returns a
    ``3 x 2n`` matrix whose columns are ordered ``u1, v1, u2, v2, ...``.
    """
    n = len(pix)
    sb = _transformed_los_numpy(pix, cinv, to_sphere)
    m = sb.T @ sb
    b = sb.sum(axis=0)
    # perturbed pixel sets: (point, coord, sign)
    pert = np.repeat(pix[:, None, None, :], 2, axis=1).repeat(2, axis=2)
    for c in range(2):
        pert[:, c, 0, c] += step
        pert[:, c, 1, c] -= step
    sp = _transformed_los_numpy(pert.reshape(-1, 2), cinv, to_sphere)
    s0 = np.repeat(sb, 4, axis=0)
    mp = m - s0[:, :, None] * s0[:, None, :] + sp[:, :, None] * sp[:, None, :]
    bp = b - s0 + sp
    npert = np.linalg.solve(mp, bp[..., None])[..., 0]
    nn = np.einsum("ij,ij->i", npert, npert)
    pos = (npert / np.sqrt(nn - 1.0)[:, None]) @ from_sphere.T
    pos = pos.reshape(n, 2, 2, 3)
    jac = (pos[:, :, 0, :] - pos[:, :, 1, :]) / (2.0 * step)
    return jac.reshape(2 * n, 3).T


@njit
def _solve3(m, b):
    det = (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
           - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
           + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    x = np.empty(3)
    x[0] = (b[0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (b[1] * m[2, 2] - m[1, 2] * b[2])
            + m[0, 2] * (b[1] * m[2, 1] - m[1, 1] * b[2])) / det
    x[1] = (m[0, 0] * (b[1] * m[2, 2] - m[1, 2] * b[2])
            - b[0] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * b[2] - b[1] * m[2, 0])) / det
    x[2] = (m[0, 0] * (m[1, 1] * b[2] - b[1] * m[2, 1])
            - m[0, 1] * (m[1, 0] * b[2] - b[1] * m[2, 0])
            + b[0] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])) / det
    return x


@njit
def _los_one(u, v, cinv, to_sphere):
    s = np.empty(3)
    for k in range(3):
        s[k] = cinv[k, 0] * u + cinv[k, 1] * v + cinv[k, 2]
    ns = math.sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2])
    out = np.empty(3)
    for k in range(3):
        out[k] = (to_sphere[k, 0] * s[0] + to_sphere[k, 1] * s[1]
                  + to_sphere[k, 2] * s[2]) / ns
    no = math.sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2])
    return out / no


@njit
def limb_jacobian_numba(pix, cinv, to_sphere, from_sphere, step):
    n = pix.shape[0]
    sb = np.empty((n, 3))
    m = np.zeros((3, 3))
    b = np.zeros(3)
    for i in range(n):
        sb[i] = _los_one(pix[i, 0], pix[i, 1], cinv, to_sphere)
        for r in range(3):
            b[r] += sb[i, r]
            for c in range(3):
                m[r, c] += sb[i, r] * sb[i, c]
    jac = np.empty((3, 2 * n))
    mp = np.empty((3, 3))
    bp = np.empty(3)
    pos = np.empty((2, 3))
    for i in range(n):
        for c in range(2):
            for sgn in range(2):
                u = pix[i, 0]
                v = pix[i, 1]
                delta = step if sgn == 0 else -step
                if c == 0:
                    u += delta
                else:
                    v += delta
                sp = _los_one(u, v, cinv, to_sphere)
                for r in range(3):
                    bp[r] = b[r] - sb[i, r] + sp[r]
                    for q in range(3):
                        mp[r, q] = m[r, q] - sb[i, r] * sb[i, q] + sp[r] * sp[q]
                nv = _solve3(mp, bp)
                scale = 1.0 / math.sqrt(nv[0] * nv[0] + nv[1] * nv[1] + nv[2] * nv[2] - 1.0)
                for r in range(3):
                    pos[sgn, r] = scale * (from_sphere[r, 0] * nv[0]
                                           + from_sphere[r, 1] * nv[1]
                                           + from_sphere[r, 2] * nv[2])
            for r in range(3):
                jac[r, 2 * i + c] = (pos[0, r] - pos[1, r]) / (2.0 * step)
    return jac


# ---------------------------------------------------------------------------
# ANH3BP propagation (RK4, constant control) with optional covariance
# ---------------------------------------------------------------------------

def _anh3bp_rhs_py(x, beta, u, model):
    # model = (gravity scale, rotating-frame scale)
    grav = model[0]
    frame = model[1]
    rr = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    g = grav / (rr * math.sqrt(rr)) if grav != 0.0 else 0.0
    out = np.empty(6)
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[5]
    out[3] = frame * (2.0 * x[4] + 3.0 * x[0]) - g * x[0] + beta + u[0]
    out[4] = -frame * 2.0 * x[3] - g * x[1] + u[1]
    out[5] = -frame * x[2] - g * x[2] + u[2]
    return out


def _jacobian_py(x, model):
    """Continuous-time Jacobian of the ANH3BP right-hand side."""
    grav = model[0]
    frame = model[1]
    rx, ry, rz = x[0], x[1], x[2]
    rr = rx * rx + ry * ry + rz * rz
    r3 = grav / (rr * math.sqrt(rr))
    r5 = 3.0 * r3 / rr
    a = np.zeros((6, 6))
    a[0, 3] = 1.0
    a[1, 4] = 1.0
    a[2, 5] = 1.0
    a[3, 0] = -r3 + r5 * rx * rx + 3.0 * frame
    a[3, 1] = r5 * rx * ry
    a[3, 2] = r5 * rx * rz
    a[4, 0] = r5 * ry * rx
    a[4, 1] = -r3 + r5 * ry * ry
    a[4, 2] = r5 * ry * rz
    a[5, 0] = r5 * rz * rx
    a[5, 1] = r5 * rz * ry
    a[5, 2] = -r3 + r5 * rz * rz - frame
    a[3, 4] = 2.0 * frame
    a[4, 3] = -2.0 * frame
    return a


def _rk4_py(x0, beta, u, model, h, nsteps):
    x = x0.copy()
    for _ in range(nsteps):
        k1 = _anh3bp_rhs_py(x, beta, u, model)
        k2 = _anh3bp_rhs_py(x + 0.5 * h * k1, beta, u, model)
        k3 = _anh3bp_rhs_py(x + 0.5 * h * k2, beta, u, model)
        k4 = _anh3bp_rhs_py(x + h * k3, beta, u, model)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            break
    return x


def _rk4_cov_py(x0, p0, beta, u, model, h, nsteps):
    """RK4 state propagation with ``P <- F P F^T``, ``F = I + A h`` per step."""
    x = x0.copy()
    p = p0.copy()
    eye = np.eye(6)
    for _ in range(nsteps):
        f = eye + _jacobian_py(x, model) * h
        p = f @ p @ f.T
        k1 = _anh3bp_rhs_py(x, beta, u, model)
        k2 = _anh3bp_rhs_py(x + 0.5 * h * k1, beta, u, model)
        k3 = _anh3bp_rhs_py(x + 0.5 * h * k2, beta, u, model)
        k4 = _anh3bp_rhs_py(x + h * k3, beta, u, model)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            break
    return x, p


anh3bp_rhs_numpy = _anh3bp_rhs_py
anh3bp_jacobian_numpy = _jacobian_py
rk4_numpy = _rk4_py
rk4_cov_numpy = _rk4_cov_py

anh3bp_rhs_numba = njit(_anh3bp_rhs_py)
anh3bp_jacobian_numba = njit(_jacobian_py)
_rhs_nb = anh3bp_rhs_numba
_jac_nb = anh3bp_jacobian_numba


@njit
def rk4_numba(x0, beta, u, model, h, nsteps):
    x = x0.copy()
    for _ in range(nsteps):
        k1 = _rhs_nb(x, beta, u, model)
        k2 = _rhs_nb(x + 0.5 * h * k1, beta, u, model)
        k3 = _rhs_nb(x + 0.5 * h * k2, beta, u, model)
        k4 = _rhs_nb(x + h * k3, beta, u, model)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            break
    return x


@njit
def rk4_cov_numba(x0, p0, beta, u, model, h, nsteps):
    x = x0.copy()
    p = p0.copy()
    eye = np.eye(6)
    for _ in range(nsteps):
        f = eye + _jac_nb(x, model) * h
        p = f @ p @ f.T
        k1 = _rhs_nb(x, beta, u, model)
        k2 = _rhs_nb(x + 0.5 * h * k1, beta, u, model)
        k3 = _rhs_nb(x + 0.5 * h * k2, beta, u, model)
        k4 = _rhs_nb(x + h * k3, beta, u, model)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            break
    return x, p


if USE_NUMBA:
    shade_ellipsoid = shade_ellipsoid_numba
    gradient_magnitude = gradient_magnitude_numba
    limb_jacobian = limb_jacobian_numba
    anh3bp_rhs = anh3bp_rhs_numba
    anh3bp_jacobian = anh3bp_jacobian_numba
    rk4 = rk4_numba
    rk4_cov = rk4_cov_numba
else:
    shade_ellipsoid = shade_ellipsoid_numpy
    gradient_magnitude = gradient_magnitude_numpy
    limb_jacobian = limb_jacobian_numpy
    anh3bp_rhs = anh3bp_rhs_numpy
    anh3bp_jacobian = anh3bp_jacobian_numpy
    rk4 = rk4_numpy
    rk4_cov = rk4_cov_numpy
