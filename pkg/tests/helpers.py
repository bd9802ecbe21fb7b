"""Shared oracles for the test modules."""

import numpy as np

from sbnav.opnav import ShapeMatrix, line_of_sight_matrix


def analytic_limb(r_c, attitude, semi_axes, intr, n=60, arc=(0.0, 2 * np.pi)):
    """Exact limb pixels of an ellipsoid whose center sits at ``r_c`` (camera frame).

    Built in the space where the ellipsoid is the unit sphere: the limb is
    the circle of tangent directions at half-angle ``asin(1/|c|)`` about the
    sphered center ``c``.  Returns ``(n, 3)`` homogeneous pixels.
    """
    shape = ShapeMatrix(tuple(semi_axes))
    to_sphere = shape.D @ np.asarray(attitude).T
    from_sphere = np.asarray(attitude) @ shape.D_inv
    c = to_sphere @ np.asarray(r_c, dtype=float)
    cn = np.linalg.norm(c)
    axis = c / cn
    half = np.arcsin(1.0 / cn)
    a = np.cross(axis, [1.0, 0.0, 0.0])
    if np.linalg.norm(a) < 1e-6:
        a = np.cross(axis, [0.0, 1.0, 0.0])
    a /= np.linalg.norm(a)
    b = np.cross(axis, a)
    ang = np.linspace(arc[0], arc[1], n, endpoint=False)
    sb = np.cos(half) * axis + np.sin(half) * (np.cos(ang)[:, None] * a + np.sin(ang)[:, None] * b)
    s = sb @ from_sphere.T
    C = np.linalg.inv(line_of_sight_matrix(intr))
    pix = s @ C.T
    return pix / pix[:, 2:3]


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q
