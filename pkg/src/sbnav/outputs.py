"""Run-directory writers: CSV tables, SVG plots and the manifest.

Floats are written with a fixed ``%.10g`` format so that a given
(config, seed) pair always produces the same bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

import sbnav

FLOAT_FMT = "{:.10g}"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "nan" if np.isnan(x) else FLOAT_FMT.format(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> dict:
    """Columns of a CSV written by :func:`write_csv` as float arrays (strings kept if not numeric)."""
    with Path(path).open(newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([float(c) for c in col])
        except ValueError:
            out[name] = col
    return out


def write_dict_rows(path, rows: list[dict]) -> Path:
    header = list(rows[0]) if rows else []
    return write_csv(path, header, ([r[k] for k in header] for r in rows))


HISTORY_HEADER = (
    ["t_hr"]
    + [f"truth_{c}" for c in ("x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms")]
    + [f"est_{c}" for c in ("x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms")]
    + ["meas_x_km", "meas_y_km", "meas_z_km", "err_norm_km", "bound_km", "u_mps2",
       "V", "Vhat", "g1", "g2", "g3", "angle_deg", "valid"]
)


def trial_history_rows(res):
    """One row per control step; measurement columns are filled at epochs."""
    meas = {round(float(t), 3): (z, v) for t, z, v in zip(res.meas_t, res.meas_z, res.meas_valid)}
    err = res.err_norm
    ang = res.angle_deg
    un = np.linalg.norm(res.u, axis=1)
    for k, t in enumerate(res.t):
        z, valid = meas.get(round(float(t), 3), (np.full(3, np.nan), False))
        yield ([t / 3600.0, *res.truth[k], *res.estimate[k], *z, err[k], res.bound[k], un[k],
                res.V[k], res.V_hat[k], *res.g[k], ang[k], bool(valid)])


def write_trial(run_dir, res) -> list[Path]:
    run_dir = Path(run_dir)
    files = [write_csv(run_dir / "trial_history.csv", HISTORY_HEADER, trial_history_rows(res))]
    summary = {
        "verdict": res.verdict, "reason": res.reason, "delta_v_mps": res.delta_v,
        "fuel_kg": res.fuel_mass, "max_accel_mps2": res.max_accel,
        "inside_fraction": res.inside_fraction(),
        "min_angle_deg": float(np.min(res.angle_deg)),
        "valid_measurements": int(np.sum(res.meas_valid)), "epochs": int(len(res.meas_valid)),
    }
    p = run_dir / "trial_summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files.append(p)
    return files


SUMMARY_HEADER = ["trial_id", "verdict", "delta_v_mps", "fuel_kg", "max_accel_mps2"]


def write_campaign(run_dir, stats) -> list[Path]:
    run_dir = Path(run_dir)
    rows = zip(range(stats.n_trials), stats.verdicts, stats.delta_v, stats.fuel, stats.max_accel)
    files = [write_csv(run_dir / "campaign_summary.csv", SUMMARY_HEADER, rows)]
    agg = [
        ("name", stats.name), ("base_seed", stats.base_seed), ("n_trials", stats.n_trials),
        ("n_success", stats.n_success), ("success_rate", stats.success_rate),
        ("inside_fraction", stats.inside_fraction),
        ("delta_v_median_mps", float(np.median(stats.delta_v))),
        ("delta_v_mean_mps", float(np.mean(stats.delta_v))),
    ]
    for v in ("success", "diverged", "not_converged", "error"):
        agg.append((f"verdict_{v}", sum(x == v for x in stats.verdicts)))
    files.append(write_csv(run_dir / "campaign_stats.csv", ["metric", "value"], agg))
    files.append(write_csv(run_dir / "error_envelope.csv",
                           ["t_hr", "err_q50_km", "err_q90_km", "bound_q50_km", "bound_q90_km"],
                           stats.err_quantiles))
    return files


# ---------------------------------------------------------------------------
# SVG plots (matplotlib, svg backend, no timestamps)
# ---------------------------------------------------------------------------

def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "sbnav"
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    return plt, fig, ax


def _save(plt, fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def line_plot(path, x, series: dict, xlabel: str, ylabel: str, logy: bool = False, hline=None) -> Path:
    plt, fig, ax = _figure()
    for label, y in series.items():
        ax.plot(x, y, label=label, lw=1.2)
    if hline is not None:
        ax.axhline(hline, color="k", ls="--", lw=0.8)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(plt, fig, path)


def trajectory_plot(path, truth_km) -> Path:
    plt, fig, ax = _figure()
    ax.plot(truth_km[:, 1], truth_km[:, 2], lw=1.0, label="y-z")
    ax.plot(truth_km[:, 0], truth_km[:, 2], lw=1.0, label="x-z")
    ax.plot([0], [0], "ko", ms=3)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x or y (km)")
    ax.set_ylabel("z (km)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(plt, fig, path)


def hist_plot(path, values, xlabel: str, bins: int = 10) -> Path:
    plt, fig, ax = _figure()
    ax.hist(np.asarray(values, dtype=float), bins=bins, color="0.5", edgecolor="k")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("trials")
    return _save(plt, fig, path)


def trial_plots(run_dir, t_hr, err, bound, angle, truth_km) -> list[Path]:
    run_dir = Path(run_dir)
    return [
        line_plot(run_dir / "error.svg", t_hr, {"|error| (km)": err, "3-sigma bound (km)": bound},
                  "time (h)", "km", logy=True),
        line_plot(run_dir / "angle.svg", t_hr, {"angle from +x (deg)": angle}, "time (h)", "deg", hline=30.0),
        trajectory_plot(run_dir / "trajectory.svg", truth_km),
    ]


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _versions() -> dict:
    import importlib.metadata as md

    out = {"sbnav": sbnav.__version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba", "scikit-image", "Pillow", "matplotlib"):
        try:
            out[pkg] = md.version(pkg)
        except md.PackageNotFoundError:
            out[pkg] = None
    return out


def write_manifest(run_dir, command: str, config: dict, seed, files) -> Path:
    run_dir = Path(run_dir)
    from sbnav._accel import USE_NUMBA

    entries = {}
    for f in sorted(Path(p) for p in files):
        entries[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    doc = {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "numba": bool(USE_NUMBA),
        "versions": _versions(),
        "files": entries,
    }
    p = run_dir / "manifest.json"
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return p
