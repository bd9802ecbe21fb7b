"""Closed-loop simulation: truth -> image -> OpNav -> EKF -> controller.

One trial alternates measurement epochs (every ``measurement_interval_h``)
with control sub-steps of ``control_step_s`` seconds.  The controller always
acts on the filter estimate propagated to the current sub-step; the control
is held constant over each sub-step while the truth is integrated with RK4.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sbnav import control as ctl
from sbnav import ekf
from sbnav.dynamics import (DAY, HOUR, BodyParams, DynamicsError, PropagationError,
                            fto_lambda, fto_state, hill_to_milankovitch, propagate_segment,
                            srp_beta)
from sbnav.imaging import CameraIntrinsics
from sbnav.opnav import MeasurementConfig, measure

log = logging.getLogger(__name__)

G0 = 9.80665


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "stationkeeping"
    r0_km: tuple = (1.0214, 0.0, -2.0429)
    v0_mmps: tuple = (40.493, 40.493, 40.493)
    estimate_sigma_m: float = 30.0
    P0_diag: tuple = (3.2761, 3.2761, 3.2761, 8.544e-17, 8.544e-17, 8.544e-17)
    Q_diag: tuple = (1e-3, 1e-3, 1e-3, 1e-6, 1e-6, 1e-6)
    target: dict = field(default_factory=lambda: {"kind": "circular", "radius_km": 2.0429, "tilt_deg": 31.0})
    K_diag: tuple = (1e-2, 1e-3, 1e-3, 1e-4, 1e-3, 1e-4)
    weights: tuple = (1.0, 1.0, 10.0)
    sharpness: tuple = (1.0, 1.0, 1.0)
    alpha_deg: float = 30.0
    r_min_factor: float = 2.0
    r_max_factor: float = 25.0
    g2_form: str = "printed"
    gradient_mode: str = "finite_difference"
    measurement_interval_h: float = 1.5
    control_step_s: float = 5400.0
    integrator_step_s: float = 60.0
    duration_days: float = 3.0
    seed: int = 0
    controller_mode: str = "constrained"
    shape_ratios: tuple = (1.0, 1.0, 1.0)
    rotating: bool = True
    u_max: float = 1e-5
    success_fraction: float = 0.1
    V_floor: float = 1e-6
    measurement: dict = field(default_factory=dict)
    camera: dict = field(default_factory=dict)
    isp_s: float = 3000.0
    m_sc_kg: float = 600.0
    body: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            self._validate()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        if not self.duration_days > 0:
            raise ConfigError("duration_days must be positive")
        if not self.measurement_interval_h > 0:
            raise ConfigError("measurement_interval_h must be positive")
        if not 0 < self.control_step_s <= self.measurement_interval_h * HOUR:
            raise ConfigError("control_step_s must lie in (0, measurement interval]")
        if not 0 < self.integrator_step_s:
            raise ConfigError("integrator_step_s must be positive")
        if self.controller_mode not in ("constrained", "unconstrained"):
            raise ConfigError("controller_mode must be 'constrained' or 'unconstrained'")
        for name, n in (("r0_km", 3), ("v0_mmps", 3), ("P0_diag", 6), ("Q_diag", 6), ("K_diag", 6),
                        ("weights", 3), ("sharpness", 3), ("shape_ratios", 3)):
            if len(getattr(self, name)) != n:
                raise ConfigError(f"{name} needs {n} entries")
        if min(self.P0_diag) < 0 or min(self.Q_diag) < 0 or min(self.K_diag) <= 0:
            raise ConfigError("P0/Q must be non-negative and K positive")
        if self.target.get("kind") not in ("circular", "fto", "elements"):
            raise ConfigError("target.kind must be 'circular', 'fto' or 'elements'")
        if self.estimate_sigma_m < 0:
            raise ConfigError("estimate_sigma_m must be non-negative")
        # build derived objects once to surface bad values early
        self.body_params()
        self.measurement_config()
        self.intrinsics()
        self.constraint_params()

    # -- derived objects ----------------------------------------------------
    def body_params(self) -> BodyParams:
        kw = dict(self.body)
        kw["shape_ratios"] = tuple(self.shape_ratios)
        for key in ("rotation_axis", "shape_ratios"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return BodyParams(**kw)

    def measurement_config(self) -> MeasurementConfig:
        kw = dict(self.measurement)
        kw.setdefault("rotating", self.rotating)
        return MeasurementConfig(**kw)

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(**self.camera)

    def constraint_params(self) -> ctl.ConstraintParams:
        body = self.body_params()
        cp = ctl.ConstraintParams.from_body(
            body.norm.length, body.radius, alpha=np.radians(self.alpha_deg),
            weights=tuple(self.weights), sharpness=tuple(self.sharpness), g2_form=self.g2_form)
        cp = dataclasses.replace(cp, r_min=self.r_min_factor * body.radius / body.norm.length,
                                 r_max=self.r_max_factor * body.radius / body.norm.length)
        return cp if self.controller_mode == "constrained" else cp.unconstrained()

    def target_slow(self) -> np.ndarray:
        body = self.body_params()
        L = body.norm.length
        t = self.target
        kind = t["kind"]
        if kind == "elements":
            return np.r_[np.asarray(t["h"], dtype=float), np.asarray(t["e"], dtype=float)]
        radius = float(t.get("radius_km", 2.0429)) / L
        if kind == "fto":
            lam = fto_lambda(body, float(t.get("radius_km", 2.0429)))
            x = fto_state(body, lam, sign=int(t.get("sign", 1)), radius=radius)
            m = hill_to_milankovitch(x[:3], x[3:])
            return m.slow
        # circular orbit whose normal is the initial one turned toward +x
        # until h_x / |h| = sin(tilt), i.e. the plane clears the x axis by tilt
        tilt = np.radians(float(t.get("tilt_deg", 31.0)))
        r0, v0 = body.norm.to_nd(self.r0_km, np.asarray(self.v0_mmps) * 1e-6)
        h0 = hill_to_milankovitch(r0, v0).h
        yz = np.array([h0[1], h0[2]])
        yz = yz / np.linalg.norm(yz) if np.linalg.norm(yz) > 1e-12 else np.array([0.0, 1.0])
        hhat = np.array([np.sin(tilt), np.cos(tilt) * yz[0], np.cos(tilt) * yz[1]])
        return np.r_[np.sqrt(radius) * hhat, np.zeros(3)]

    def controller_config(self) -> ctl.ControllerConfig:
        body = self.body_params()
        return ctl.ControllerConfig(np.diag(self.K_diag), self.target_slow(), u_max=self.u_max,
                                    accel_unit=body.norm.accel * 1e3,
                                    gradient_mode=self.gradient_mode)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            kw[k] = tuple(v) if isinstance(v, list) else v
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


def bundled_scenarios() -> list[str]:
    from importlib import resources

    return sorted(p.name[:-5] for p in resources.files("sbnav.scenarios").iterdir() if p.name.endswith(".json"))


def load_scenario(spec) -> ScenarioConfig:
    """Config from a JSON path, or from a bundled scenario name such as ``approach``."""
    path = Path(spec)
    if path.exists() or len(path.parts) > 1:
        return ScenarioConfig.from_json(path)
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if stem in bundled_scenarios():
        from importlib import resources

        return ScenarioConfig.from_dict(json.loads(resources.files("sbnav.scenarios").joinpath(stem + ".json").read_text()))
    raise ConfigError(f"config file not found: {spec}")


@dataclass
class TrialResult:
    verdict: str                 # success | diverged | not_converged | error
    reason: str
    t: np.ndarray                # s, per control step (row 0 = initial)
    truth: np.ndarray            # km, km/s
    estimate: np.ndarray
    u: np.ndarray                # m/s^2, applied over the step ending at t
    V: np.ndarray
    V_hat: np.ndarray
    g: np.ndarray
    P: np.ndarray
    saturated: np.ndarray
    bound: np.ndarray            # 3 sqrt(lambda_max(P_r)), km
    meas_t: np.ndarray           # epoch times, s
    meas_z: np.ndarray           # Hill spacecraft position from OpNav, km (nan if invalid)
    meas_valid: np.ndarray
    meas_points: np.ndarray
    epoch_err: np.ndarray        # |truth - estimate| after update, km
    epoch_bound: np.ndarray      # filter bound after update, km
    delta_v: float = 0.0
    fuel_mass: float = 0.0
    max_accel: float = 0.0
    V_truth: np.ndarray = None

    @property
    def success(self) -> bool:
        return self.verdict == "success"

    @property
    def angle_deg(self) -> np.ndarray:
        r = self.truth[:, :3]
        return np.degrees(np.arccos(np.clip(r[:, 0] / np.linalg.norm(r, axis=1), -1, 1)))

    @property
    def err_norm(self) -> np.ndarray:
        return np.linalg.norm(self.truth[:, :3] - self.estimate[:, :3], axis=1)

    def inside_fraction(self) -> float:
        """Fraction of measurement epochs with the estimate error inside the 3-sigma bound."""
        if len(self.epoch_err) == 0:
            return float("nan")
        return float(np.mean(self.epoch_err <= self.epoch_bound))


def detect_divergence(r_km, cp_km: tuple) -> str | None:
    """Reason string if the position violates the cone or the radius band.

    ``cp_km = (alpha_rad, r_min_km, r_max_km)``.
    """
    alpha, r_min, r_max = cp_km
    r = np.asarray(r_km, dtype=float)
    rn = np.linalg.norm(r)
    if rn < r_min:
        return "min_radius"
    if rn > r_max:
        return "max_radius"
    if np.arccos(np.clip(r[0] / rn, -1.0, 1.0)) < alpha:
        return "cone"
    return None


def success_check(diverged: bool, V0: float, VT: float, fraction: float = 0.1, V_floor: float = 0.0) -> bool:
    if diverged:
        return False
    return VT <= max(fraction * V0, V_floor)


def fuel_mass(u_norms_mps2, dt_s, isp_s: float = 3000.0, m_sc_kg: float = 600.0):
    """Rectangle-rule ``(delta_v m/s, delta_m kg)`` for a control history."""
    if not (isp_s > 0 and m_sc_kg > 0):
        raise ValueError("Isp and spacecraft mass must be positive")
    u = np.asarray(u_norms_mps2, dtype=float)
    dv = float(np.sum(u * dt_s))
    return dv, m_sc_kg * dv / (isp_s * G0)


def trial_rng(base_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(base_seed), spawn_key=(int(trial),)))


def run_closed_loop(cfg: ScenarioConfig, trial: int = 0, base_seed: int | None = None) -> TrialResult:
    """Simulate one trial; ``(base_seed, trial)`` fixes every random draw."""
    body = cfg.body_params()
    nd = body.norm
    beta = srp_beta(body)[0]
    intr = cfg.intrinsics()
    mcfg = cfg.measurement_config()
    cp = cfg.constraint_params()
    ccfg = cfg.controller_config()
    noise = ekf.NoiseConfig(np.diag(cfg.Q_diag))
    seed = cfg.seed if base_seed is None else base_seed
    rng = trial_rng(seed, trial)
    frame_seeds = rng.integers(0, 2 ** 63 - 1, size=100000)

    lim = (np.radians(cfg.alpha_deg), cfg.r_min_factor * body.radius, cfg.r_max_factor * body.radius)
    x_true = nd.state_to_nd(np.r_[cfg.r0_km, np.asarray(cfg.v0_mmps) * 1e-6])
    x_est_km = np.r_[cfg.r0_km + rng.normal(0.0, cfg.estimate_sigma_m * 1e-3, 3),
                     np.asarray(cfg.v0_mmps) * 1e-6]
    fs = ekf.FilterState.from_km(x_est_km, np.diag(cfg.P0_diag), body)

    interval = cfg.measurement_interval_h * HOUR
    n_epochs = int(round(cfg.duration_days * DAY / interval))
    n_sub = int(round(interval / cfg.control_step_s))
    dt_ctrl = interval / n_sub
    h_int = cfg.integrator_step_s / nd.time
    scale6 = np.r_[np.full(3, nd.length), np.full(3, nd.velocity)]

    rows_t, rows_truth, rows_est, rows_u = [], [], [], []
    rows_V, rows_Vh, rows_g, rows_P, rows_sat, rows_bound = [], [], [], [], [], []
    m_t, m_z, m_valid, m_pts, e_err, e_bound = [], [], [], [], [], []
    target = ccfg.target

    def truth_V(x):
        try:
            s = hill_to_milankovitch(x[:3], x[3:]).slow
        except DynamicsError:
            return float("nan")
        d = s - target
        return float(d @ ccfg.K @ d)

    def record(t, u_mps2, out):
        rows_t.append(t)
        rows_truth.append(x_true * scale6)
        rows_est.append(fs.x_hat * scale6)
        rows_u.append(u_mps2)
        if out is None:
            rows_V.append(np.nan); rows_Vh.append(np.nan)
            rows_g.append(np.full(3, np.nan)); rows_P.append(np.full(3, np.nan)); rows_sat.append(False)
        else:
            rows_V.append(out.V); rows_Vh.append(out.V_hat)
            rows_g.append(out.g); rows_P.append(out.P); rows_sat.append(out.saturated)
        rows_bound.append(ekf.error_bound(fs.P) * nd.length)

    verdict, reason = None, ""
    t = 0.0
    record(t, np.zeros(3), None)
    V0 = truth_V(x_true)
    try:
        for k in range(n_epochs + 1):
            pos_km = x_true[:3] * nd.length
            m = measure(pos_km, body, intr, t, int(frame_seeds[k]), mcfg)
            m_t.append(t)
            m_pts.append(m.n_points)
            m_valid.append(bool(m.valid))
            if m.valid:
                z = m.position_hill
                m_z.append(z)
                fs, _ = ekf.update(fs, z / nd.length, m.R_hill / nd.length ** 2)
            else:
                m_z.append(np.full(3, np.nan))
            e_err.append(float(np.linalg.norm((fs.x_hat[:3] - x_true[:3]) * nd.length)))
            e_bound.append(ekf.error_bound(fs.P) * nd.length)
            rows_est[-1] = fs.x_hat * scale6
            rows_bound[-1] = e_bound[-1]
            if k == n_epochs:
                break
            for j in range(n_sub):
                r, v = fs.x_hat[:3], fs.x_hat[3:]
                out = None
                try:
                    el = hill_to_milankovitch(r, v)
                    vi = v + np.array([-r[1], r[0], 0.0])
                    out = ctl.control(el.slow, ccfg, cp, r, vi)
                    u = out.u
                except DynamicsError as exc:
                    log.debug("controller undefined at t=%.0f s: %s", t, exc)
                    u = np.zeros(3)
                x_true = propagate_segment(x_true, dt_ctrl / nd.time, beta, u, h_int)
                fs = ekf.predict(fs, u, dt_ctrl, body, noise, substep_s=cfg.integrator_step_s,
                                 add_process_noise=(j == n_sub - 1))
                t += dt_ctrl
                if not np.all(np.isfinite(x_true)):
                    raise PropagationError("truth propagation failed", t, x_true)
                record(t, u * ccfg.accel_unit, out)
                why = detect_divergence(x_true[:3] * nd.length, lim)
                if why:
                    verdict, reason = "diverged", why
                    break
            if verdict:
                break
    except (PropagationError, ekf.FilterError, np.linalg.LinAlgError) as exc:
        verdict, reason = "error", str(exc)

    u_arr = np.array(rows_u)
    un = np.linalg.norm(u_arr, axis=1)
    dv, dm = fuel_mass(un[1:], dt_ctrl, cfg.isp_s, cfg.m_sc_kg)
    truth = np.array(rows_truth)
    V_truth = np.array([truth_V(x / scale6) for x in truth])
    if verdict is None:
        VT = V_truth[-1]
        ok = success_check(False, V0, VT, cfg.success_fraction, cfg.V_floor)
        verdict, reason = ("success", "") if ok else ("not_converged", f"V(T)/V(0) = {VT / V0:.3g}")
    return TrialResult(
        verdict, reason, np.array(rows_t), truth, np.array(rows_est), u_arr,
        np.array(rows_V), np.array(rows_Vh), np.array(rows_g), np.array(rows_P),
        np.array(rows_sat), np.array(rows_bound), np.array(m_t), np.array(m_z).reshape(-1, 3),
        np.array(m_valid), np.array(m_pts), np.array(e_err), np.array(e_bound),
        dv, dm, float(un.max()) if len(un) else 0.0, V_truth)


@dataclass
class CampaignStats:
    name: str
    base_seed: int
    n_trials: int
    n_success: int
    verdicts: list
    reasons: list
    delta_v: np.ndarray
    fuel: np.ndarray
    max_accel: np.ndarray
    inside_steps: int
    total_steps: int
    err_quantiles: np.ndarray    # rows: epoch index; cols: t_hr, err q50, q90, bound q50, q90
    dv_hist: tuple               # (counts, edges)

    @property
    def success_rate(self) -> float:
        return self.n_success / self.n_trials

    @property
    def inside_fraction(self) -> float:
        return self.inside_steps / self.total_steps if self.total_steps else float("nan")


def _trial_summary(args):
    cfg, i, seed = args
    r = run_closed_loop(cfg, trial=i, base_seed=seed)
    err = r.err_norm
    return dict(i=i, verdict=r.verdict, reason=r.reason, dv=r.delta_v, fuel=r.fuel_mass,
                amax=r.max_accel, err=err, bound=r.bound, t=r.t,
                inside=int(np.sum(err <= r.bound)), steps=len(err))


def run_monte_carlo(cfg: ScenarioConfig, n_trials: int, base_seed: int | None = None,
                    workers: int = 1) -> CampaignStats:
    """Independent trials ``0..n_trials-1``; results do not depend on ``workers``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    seed = cfg.seed if base_seed is None else int(base_seed)
    jobs = [(cfg, i, seed) for i in range(n_trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_trial_summary, jobs, chunksize=1))
    else:
        rows = [_trial_summary(j) for j in jobs]
    rows.sort(key=lambda d: d["i"])
    n_ep = max(len(d["t"]) for d in rows)
    err = np.full((n_trials, n_ep), np.nan)
    bnd = np.full((n_trials, n_ep), np.nan)
    t_ref = next(d["t"] for d in rows if len(d["t"]) == n_ep)
    for k, d in enumerate(rows):
        err[k, :len(d["err"])] = d["err"]
        bnd[k, :len(d["bound"])] = d["bound"]
    with np.errstate(all="ignore"):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            q = np.column_stack([t_ref / HOUR, np.nanpercentile(err, 50, axis=0), np.nanpercentile(err, 90, axis=0),
                                 np.nanpercentile(bnd, 50, axis=0), np.nanpercentile(bnd, 90, axis=0)])
    dv = np.array([d["dv"] for d in rows])
    hist = np.histogram(dv, bins=10)
    verdicts = [d["verdict"] for d in rows]
    return CampaignStats(cfg.name, seed, n_trials, sum(v == "success" for v in verdicts), verdicts,
                         [d["reason"] for d in rows], dv, np.array([d["fuel"] for d in rows]),
                         np.array([d["amax"] for d in rows]), sum(d["inside"] for d in rows),
                         sum(d["steps"] for d in rows), q, hist)


# ---------------------------------------------------------------------------
# measurement sweeps
# ---------------------------------------------------------------------------

def _sweep_row(m, truth_km, key, value):
    row = {key: value}
    if m.valid:
        z = m.position_hill
        err = float(np.linalg.norm(z - truth_km))
        row.update(valid=True, n_points=m.n_points, sigma_pix=m.sigma_pix, err_km=err,
                   bound_km=m.bound_3sigma, z_x=z[0], z_y=z[1], z_z=z[2])
    else:
        row.update(valid=False, n_points=m.n_points, sigma_pix=np.nan, err_km=np.nan,
                   bound_km=np.nan, z_x=np.nan, z_y=np.nan, z_z=np.nan)
    return row


def sweep_distance(ranges_km=None, n_cases: int = 100, body: BodyParams | None = None,
                   intr: CameraIntrinsics = CameraIntrinsics(), mcfg: MeasurementConfig = MeasurementConfig(),
                   seed: int = 0) -> list[dict]:
    """Side-on measurements (camera on Hill ``-z``) over a range of distances."""
    body = BodyParams() if body is None else body
    ranges = np.linspace(1.0, 30.0, n_cases) if ranges_km is None else np.asarray(ranges_km, dtype=float)
    rows = []
    for i, d in enumerate(ranges):
        pos = np.array([0.0, 0.0, -d])
        m = measure(pos, body, intr, 0.0, np.random.SeedSequence(seed, spawn_key=(i,)), mcfg)
        row = _sweep_row(m, pos, "range_km", float(d))
        row["err_frac"] = row["err_km"] / d
        row["bound_frac"] = row["bound_km"] / d
        rows.append(row)
    return rows


def crossing_range(rows, fraction: float = 0.1) -> float:
    """Smallest range whose 3-sigma bound reaches ``fraction`` of the range (nan if none)."""
    for r in sorted(rows, key=lambda r: r["range_km"]):
        if r["valid"] and r["bound_km"] >= fraction * r["range_km"]:
            return r["range_km"]
    return float("nan")


def sweep_angle(angles_deg=None, n_cases: int = 100, distance_km: float = 5.0, body: BodyParams | None = None,
                intr: CameraIntrinsics = CameraIntrinsics(), mcfg: MeasurementConfig = MeasurementConfig(),
                seed: int = 0) -> list[dict]:
    """Measurements around the terminator at fixed range.

    Angle ``a`` places the camera at ``d (sin a, 0, -cos a)``: ``0`` is
    side-on, ``+90`` the dark side (+x), ``-90`` full illumination.
    """
    body = BodyParams() if body is None else body
    angles = np.linspace(-90.0, 90.0, n_cases) if angles_deg is None else np.asarray(angles_deg, dtype=float)
    rows = []
    for i, a in enumerate(angles):
        t = np.radians(a)
        pos = distance_km * np.array([np.sin(t), 0.0, -np.cos(t)])
        m = measure(pos, body, intr, 0.0, np.random.SeedSequence(seed, spawn_key=(i,)), mcfg)
        row = _sweep_row(m, pos, "angle_deg", float(a))
        row["angle_from_x_deg"] = 90.0 - float(a)
        rows.append(row)
    return rows


def fto_revolution(body: BodyParams, radius_km: float = 2.0429, n_epochs: int = 48,
                   intr: CameraIntrinsics = CameraIntrinsics(), mcfg: MeasurementConfig = MeasurementConfig(),
                   seed: int = 0) -> list[dict]:
    """Measurements along one uncontrolled frozen-terminator revolution."""
    nd = body.norm
    beta = srp_beta(body)[0]
    lam = fto_lambda(body, radius_km)
    x = fto_state(body, lam, radius=radius_km / nd.length)
    period = 2.0 * np.pi * np.sqrt((radius_km / nd.length) ** 3)  # normalized
    dt = period / n_epochs
    h = 60.0 / nd.time
    rows = []
    for k in range(n_epochs):
        t_s = k * dt * nd.time
        pos = x[:3] * nd.length
        m = measure(pos, body, intr, t_s, np.random.SeedSequence(seed, spawn_key=(k,)), mcfg)
        row = _sweep_row(m, pos, "t_hr", t_s / HOUR)
        row["range_km"] = float(np.linalg.norm(pos))
        rows.append(row)
        x = propagate_segment(x, dt, beta, np.zeros(3), h)
    return rows
