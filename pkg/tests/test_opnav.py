import numpy as np
import pytest
from helpers import analytic_limb, random_rotation
from hypothesis import given, strategies as st

from sbnav.dynamics import bennu
from sbnav.imaging import CameraIntrinsics, CameraPose, LimbPointSet
from sbnav.opnav import (DegenerateLimbError, InfeasibleGeometryError, InvalidMeasurement, MeasurementConfig,
                         OpNavMeasurement, ShapeMatrix, cra_position, estimate_sigma_pix,
                         inverse_camera_matrix, line_of_sight_matrix, measure, measure_from_limb,
                         measurement_covariance)

INTR = CameraIntrinsics()


def test_inverse_camera_matrix_general_form():
    intr = CameraIntrinsics(alpha_skew=0.3, dx=2.0, dy=1.5)
    K = np.array([[2.0, 0.3, 500.0], [0.0, 1.5, 500.0], [0.0, 0.0, 1.0]])
    assert np.allclose(inverse_camera_matrix(intr), np.linalg.inv(K))
    with pytest.raises(ValueError):
        inverse_camera_matrix(CameraIntrinsics(dx=0.0))


def test_line_of_sight_of_principal_point_is_boresight():
    s = line_of_sight_matrix(INTR) @ [500.0, 500.0, 1.0]
    assert np.allclose(s, [0.0, 0.0, 1.0])
    edge = line_of_sight_matrix(INTR) @ [1000.0, 500.0, 1.0]
    assert np.degrees(np.arctan(edge[0])) == pytest.approx(15.0)


def test_shape_matrix():
    sm = ShapeMatrix((2.0, 1.0, 0.5))
    assert np.allclose(sm.A, np.diag([0.25, 1.0, 4.0]))
    assert np.allclose(sm.D @ sm.D_inv, np.eye(3))
    with pytest.raises(ValueError):
        ShapeMatrix((1.0, -1.0, 1.0))


@given(st.integers(0, 2 ** 32 - 1), st.floats(1.0, 5.0), st.floats(1.0, 3.0), st.floats(2.5, 8.0))
def test_cra_recovers_exact_position(seed, ra, rb, dist):
    rng = np.random.default_rng(seed)
    ratios = np.sort([ra, rb, 1.0])[::-1]
    axes = 0.241 * ratios / np.prod(ratios) ** (1 / 3)
    att = random_rotation(rng)
    d = dist * max(axes)
    r_c = np.array([*rng.uniform(-0.05, 0.05, 2) * d, d])
    pix = analytic_limb(r_c, att, axes, INTR, n=40)
    est = cra_position(LimbPointSet(pix), line_of_sight_matrix(INTR), att, ShapeMatrix(tuple(axes)))
    assert np.linalg.norm(est - r_c) / np.linalg.norm(r_c) < 1e-9


def test_cra_partial_arc_still_exact():
    axes = (0.3, 0.2, 0.15)
    r_c = np.array([0.1, -0.2, 3.0])
    pix = analytic_limb(r_c, np.eye(3), axes, INTR, n=30, arc=(0.0, 0.8 * np.pi))
    est = cra_position(LimbPointSet(pix), line_of_sight_matrix(INTR), np.eye(3), ShapeMatrix(axes))
    assert np.allclose(est, r_c, rtol=1e-9)


def test_cra_degenerate_inputs():
    shape = ShapeMatrix((0.24, 0.24, 0.24))
    cinv = line_of_sight_matrix(INTR)
    with pytest.raises(DegenerateLimbError):
        cra_position(LimbPointSet.from_uv([[1, 2], [3, 4]]), cinv, np.eye(3), shape)
    line = LimbPointSet.from_uv(np.column_stack([np.linspace(100, 900, 20), np.full(20, 500.0)]))
    with pytest.raises(DegenerateLimbError):
        cra_position(line, cinv, np.eye(3), shape)


def test_cra_observer_inside_rejected():
    # rays in opposite hemispheres average out: the fitted cone axis is
    # shorter than the unit radius
    ring = analytic_limb(np.array([0.0, 0.0, 3.0]), np.eye(3), (0.24,) * 3, INTR, n=20)
    pts = np.vstack([ring, -ring])
    cinv = line_of_sight_matrix(INTR)
    with pytest.raises(InfeasibleGeometryError):
        cra_position(LimbPointSet(pts), cinv, np.eye(3), ShapeMatrix((0.24,) * 3))


def test_sigma_pix_of_perfect_circle_is_zero_and_scales_with_noise(rng):
    ang = np.linspace(0, np.pi, 200)
    uv = np.column_stack([500 + 80 * np.cos(ang), 500 + 80 * np.sin(ang)])
    assert estimate_sigma_pix(LimbPointSet.from_uv(uv)) < 1e-6
    noisy = uv + rng.normal(0, 0.5, uv.shape)
    s = estimate_sigma_pix(LimbPointSet.from_uv(noisy))
    # radial scatter of isotropic 2-D noise has the per-axis sigma
    assert 0.35 < s < 0.65
    with pytest.raises(DegenerateLimbError):
        estimate_sigma_pix(LimbPointSet.from_uv(uv[:4]))


def test_covariance_is_psd_and_scales_quadratically():
    axes = bennu().semi_axes
    pix = analytic_limb(np.array([0.0, 0.0, 5.0]), np.eye(3), axes, INTR, n=50, arc=(0, np.pi))
    cinv = line_of_sight_matrix(INTR)
    R1 = measurement_covariance(LimbPointSet(pix), cinv, np.eye(3), ShapeMatrix(tuple(axes)), 1.0)
    R2 = measurement_covariance(LimbPointSet(pix), cinv, np.eye(3), ShapeMatrix(tuple(axes)), 2.0)
    assert np.allclose(R1, R1.T)
    assert np.min(np.linalg.eigvalsh(R1)) > 0
    assert np.allclose(R2, 4.0 * R1)
    # range is the least observable direction
    w, v = np.linalg.eigh(R1)
    assert abs(v[2, -1]) > 0.99


def test_measure_side_on_and_dark_side():
    m = measure([0.0, 0.0, -5.0], bennu(), INTR, 0.0, 1)
    assert isinstance(m, OpNavMeasurement)
    assert np.linalg.norm(m.position_hill - [0, 0, -5.0]) < 0.05
    assert m.bound_3sigma > 0
    assert np.allclose(m.R_hill, m.R_hill.T)
    dark = measure([5.0, 0.0, 0.0], bennu(), INTR, 0.0, 1)
    assert isinstance(dark, InvalidMeasurement) and not dark.valid


def test_measure_is_seed_deterministic():
    a = measure([1.0, 0.5, -3.0], bennu(), INTR, 100.0, 42)
    b = measure([1.0, 0.5, -3.0], bennu(), INTR, 100.0, 42)
    assert np.array_equal(a.z, b.z) and np.array_equal(a.R, b.R)


def test_crop_matches_full_frame():
    pos = [0.5, 0.0, -2.5]
    a = measure(pos, bennu(), INTR, 0.0, 9, MeasurementConfig(noise_sigma=0.0))
    b = measure(pos, bennu(), INTR, 0.0, 9, MeasurementConfig(noise_sigma=0.0, crop=False))
    assert np.allclose(a.z, b.z, rtol=1e-12)


def test_too_few_points_is_invalid():
    pose = CameraPose.nadir([0.0, 0.0, -5.0])
    m = measure_from_limb(LimbPointSet.from_uv(np.zeros((3, 2))), pose, bennu(), INTR, 0.0)
    assert not m.valid and m.reason == "too few limb points"
