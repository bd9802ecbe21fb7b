import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbnav.dynamics import bennu
from sbnav.imaging import (CameraIntrinsics, CameraPose, GeometryError, GrayImage, LimbPointSet,
                           RenderOptions, add_noise, body_rotation, detect_edges, read_pgm, render,
                           render_noiseless, write_pgm)

INTR = CameraIntrinsics()


def test_focal_length_in_pixels():
    assert INTR.focal == pytest.approx(1866.0254037844388, rel=1e-14)
    assert (INTR.u_p, INTR.v_p) == (500.0, 500.0)


@pytest.mark.parametrize("kw", [{"fov_deg": 0.0}, {"fov_deg": 180.0}, {"S": 1}, {"S": 10.5}])
def test_bad_intrinsics(kw):
    with pytest.raises(ValueError):
        CameraIntrinsics(**kw)


def test_nadir_pose_frames():
    pose = CameraPose.nadir([0.0, 0.0, -5.0])
    R = pose.hill_from_camera
    assert np.allclose(R.T @ R, np.eye(3))
    assert np.linalg.det(R) == pytest.approx(1.0)
    # boresight points at the body
    assert np.allclose(R[:, 2], [0.0, 0.0, 1.0])
    with pytest.raises(GeometryError):
        CameraPose.nadir([0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        CameraPose([0, 0, 1], [0, 0, 2], [1, 0, 0])


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_nadir_pose_always_orthonormal(x, y, z):
    p = np.array([x, y, z])
    if np.linalg.norm(p) < 1e-3:
        return
    R = CameraPose.nadir(p).hill_from_camera
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.allclose(R[:, 2], -p / np.linalg.norm(p))


def test_body_rotation_period():
    b = bennu()
    assert np.allclose(body_rotation(b, 0.0), np.eye(3))
    assert np.allclose(body_rotation(b, b.rotation_period), np.eye(3), atol=1e-12)
    q = body_rotation(b, b.rotation_period / 4)
    # spin about -z: x goes to -y
    assert np.allclose(q @ [1, 0, 0], [0, -1, 0], atol=1e-12)


def test_side_on_sphere_is_half_lit():
    b = bennu()
    img, (rows, cols) = render_noiseless(b, CameraPose.nadir([0.0, 0.0, -5.0]), INTR)
    lit = img > 0
    # apparent radius in pixels from the tangent cone
    rad_px = INTR.focal * np.tan(np.arcsin(b.radius / 5.0))
    area = lit.sum()
    assert area == pytest.approx(0.5 * np.pi * rad_px ** 2, rel=0.03)
    # image u runs along Hill -x here, so the sunlit half sits at u > center
    assert np.allclose(CameraPose.nadir([0.0, 0.0, -5.0]).hill_from_camera[:, 0], [-1, 0, 0])
    _, jj = np.nonzero(lit)
    assert jj.min() >= 499
    assert 0.0 <= img.min() and img.max() <= 1.0


def test_dark_side_view_is_black():
    img, _ = render_noiseless(bennu(), CameraPose.nadir([5.0, 0.0, 0.0]), INTR)
    assert img.max() == 0.0


def test_camera_inside_body_rejected():
    with pytest.raises(GeometryError):
        render_noiseless(bennu(), CameraPose.nadir([0.0, 0.0, -0.1]), INTR)


def test_psf_preserves_total_brightness():
    pose = CameraPose.nadir([0.0, 0.0, -5.0])
    a, _ = render_noiseless(bennu(), pose, INTR, options=RenderOptions(psf_sigma=0.0))
    b, _ = render_noiseless(bennu(), pose, INTR, options=RenderOptions(psf_sigma=1.1))
    assert b.sum() == pytest.approx(a.sum(), rel=1e-6)


def test_noise_is_seeded_and_clipped():
    img = GrayImage(np.full((50, 50), 0.5))
    a = add_noise(img, 0.01, 3).data
    b = add_noise(img, 0.01, 3).data
    assert np.array_equal(a, b)
    assert np.std(a) == pytest.approx(0.01, rel=0.1)
    c = add_noise(GrayImage(np.zeros((20, 20))), 0.5, 1).data
    assert c.min() >= 0.0 and c.max() <= 1.0


def test_detect_edges_on_step():
    data = np.zeros((40, 40))
    data[:, 20:] = 1.0
    limb = detect_edges(data, 0.4, 0.1)
    assert set(np.unique(limb.uv[:, 0])) == {19.5, 20.5}
    assert limb.count == 80
    assert np.all(limb.points[:, 2] == 1.0)
    off = detect_edges(data, 0.4, 0.1, offset=(10, 100))
    assert np.allclose(off.uv - limb.uv, [100, 10])


def test_detect_edges_floor_and_threshold_validation():
    assert detect_edges(np.zeros((10, 10))).count == 0
    assert detect_edges(np.zeros((0, 0))).count == 0
    with pytest.raises(ValueError):
        detect_edges(np.zeros((5, 5)), rel_threshold=0.0)


def test_pgm_round_trip(tmp_path):
    img = render(bennu(), CameraPose.nadir([0.0, 0.0, -3.0]), INTR, noise_sigma=0.01, rng_seed=5)
    p = write_pgm(tmp_path / "a.pgm", img)
    assert p.read_bytes()[:2] == b"P5"
    back = read_pgm(p)
    assert back.data.shape == (1000, 1000)
    assert np.max(np.abs(back.data - img.data)) <= 0.5 / 255 + 1e-12


def test_limb_point_set_shapes():
    s = LimbPointSet.from_uv([[1.0, 2.0], [3.0, 4.0]])
    assert s.count == len(s) == 2
    assert s.points.shape == (2, 3)
