import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbnav import ekf
from sbnav.dynamics import bennu, fto_lambda, fto_state, propagate_segment, srp_beta

BODY = bennu()


def _fs(P_scale=1e-8):
    x = fto_state(BODY, fto_lambda(BODY, 2.0429))
    return ekf.FilterState(x, np.eye(6) * P_scale)


def test_km_conversion_round_trip():
    x_km = np.array([1.0, 0.0, -2.0, 4e-5, 4e-5, 4e-5])
    P_km = np.diag([3.2761] * 3 + [8.544e-17] * 3)
    fs = ekf.FilterState.from_km(x_km, P_km, BODY)
    x2, P2 = fs.to_km(BODY)
    assert np.allclose(x2, x_km, rtol=1e-14)
    assert np.allclose(P2, P_km, rtol=1e-12)


def test_noise_config_validation():
    assert ekf.NoiseConfig().Q.shape == (6, 6)
    with pytest.raises(ValueError):
        ekf.NoiseConfig(Q=-np.eye(6))
    with pytest.raises(ValueError):
        ekf.NoiseConfig(Q=np.eye(3))


def test_predict_state_matches_truth_propagator():
    fs = _fs()
    out = ekf.predict(fs, np.zeros(3), 5400.0, BODY, add_process_noise=False)
    ref = propagate_segment(fs.x_hat, 5400.0 / BODY.norm.time, srp_beta(BODY)[0], h=60.0 / BODY.norm.time)
    assert np.allclose(out.x_hat, ref, rtol=1e-12, atol=1e-15)
    assert out.t == 5400.0


def test_predict_covariance_first_order_agrees_with_expm():
    fs = _fs()
    dt_nd = 60.0 / BODY.norm.time
    out = ekf.predict(fs, np.zeros(3), 60.0, BODY, add_process_noise=False)
    F = ekf.jacobian_F(fs.x_hat, dt_nd, exact=True)
    assert np.allclose(out.P, F @ fs.P @ F.T, rtol=1e-3)


def test_process_noise_added_once():
    fs = _fs(0.0)
    q = ekf.NoiseConfig()
    a = ekf.predict(fs, np.zeros(3), 600.0, BODY, q)
    b = ekf.predict(fs, np.zeros(3), 600.0, BODY, q, add_process_noise=False)
    assert np.allclose(a.P - b.P, q.Q_nd(BODY))
    with pytest.raises(ValueError):
        ekf.predict(fs, np.zeros(3), 0.0, BODY)


def test_update_oracle_scalar_case():
    # independent position axes: K = P / (P + R) per axis
    fs = ekf.FilterState(np.zeros(6), np.diag([4.0, 4.0, 4.0, 1.0, 1.0, 1.0]))
    z = np.array([1.0, 2.0, 3.0])
    out, ok = ekf.update(fs, z, np.eye(3))
    assert ok
    assert np.allclose(out.x_hat[:3], 0.8 * z)
    assert np.allclose(out.x_hat[3:], 0.0)
    assert np.allclose(np.diag(out.P)[:3], 0.8)
    assert np.allclose(np.diag(out.P)[3:], 1.0)


def test_update_skips_non_pd_innovation():
    fs = ekf.FilterState(np.zeros(6), np.zeros((6, 6)))
    out, ok = ekf.update(fs, np.ones(3), -np.eye(3))
    assert not ok and out is fs


@given(st.integers(0, 2 ** 32 - 1))
def test_joseph_update_keeps_covariance_psd_and_shrinking(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(6, 6))
    P = a @ a.T + 1e-6 * np.eye(6)
    b = rng.normal(size=(3, 3))
    R = b @ b.T + 1e-3 * np.eye(3)
    fs = ekf.FilterState(rng.normal(size=6), P)
    out, ok = ekf.update(fs, rng.normal(size=3), R)
    assert ok
    assert np.allclose(out.P, out.P.T)
    assert np.min(np.linalg.eigvalsh(out.P)) > -1e-9 * np.max(np.abs(P))
    assert np.trace(out.P) <= np.trace(P) + 1e-9


def test_error_bound():
    assert ekf.error_bound(np.diag([1.0, 4.0, 9.0])) == pytest.approx(9.0)
    assert ekf.error_bound(np.diag([1.0, 4.0, 9.0, 100, 100, 100])) == pytest.approx(9.0)
