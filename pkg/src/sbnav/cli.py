"""Command-line entry point: ``sbnav <subcommand> ...``.

Every subcommand writes into ``--out`` (created if needed) and finishes with
a ``manifest.json`` listing the config, its hash, the seed, package versions
and a checksum of every file written.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from sbnav import harness, outputs
from sbnav.dynamics import BodyParams
from sbnav.harness import ConfigError, ScenarioConfig
from sbnav.imaging import CameraIntrinsics, CameraPose, detect_edges, render, write_pgm
from sbnav.opnav import MeasurementConfig, measure_from_limb

log = logging.getLogger("sbnav")


class UsageError(ValueError):
    pass


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _measure_cfg(args) -> MeasurementConfig:
    try:
        return MeasurementConfig(noise_sigma=args.noise, rotating=not args.static)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _body(args) -> BodyParams:
    try:
        return BodyParams(shape_ratios=tuple(args.shape))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------

def cmd_render(args) -> int:
    out = _out(args)
    body = _body(args)
    mcfg = _measure_cfg(args)
    pos = np.asarray(args.position, dtype=float)
    try:
        pose = CameraPose.nadir(pos)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    img = render(body, pose, t=args.t, noise_sigma=mcfg.noise_sigma,
                 rng_seed=np.random.SeedSequence(args.seed), options=mcfg.render_options)
    limb = detect_edges(img, mcfg.rel_threshold, mcfg.abs_min_gradient)
    m = measure_from_limb(limb, pose, body, CameraIntrinsics(), args.t, mcfg)
    files = [write_pgm(out / "image.pgm", img),
             outputs.write_csv(out / "limb.csv", ["u_px", "v_px"], limb.uv)]
    row = {"valid": bool(m.valid), "n_points": m.n_points}
    if m.valid:
        z = m.position_hill
        row.update(meas_x_km=z[0], meas_y_km=z[1], meas_z_km=z[2],
                   err_km=float(np.linalg.norm(z - pos)), bound_km=m.bound_3sigma, sigma_pix=m.sigma_pix)
    else:
        row["reason"] = m.reason
    files.append(outputs.write_dict_rows(out / "measurement.csv", [row]))
    config = {"position_km": list(pos), "shape_ratios": list(args.shape), "t_s": args.t,
              "noise": args.noise, "rotating": not args.static}
    outputs.write_manifest(out, "render", config, args.seed, files)
    print(f"render: valid={row['valid']} points={row['n_points']}"
          + (f" err={row['err_km']:.4g} km bound={row['bound_km']:.4g} km" if m.valid else ""))
    return 0


def cmd_sweep_distance(args) -> int:
    out = _out(args)
    if args.cases < 2 or not 0 < args.min < args.max:
        raise UsageError("need --cases >= 2 and 0 < --min < --max")
    body = _body(args)
    rows = harness.sweep_distance(np.linspace(args.min, args.max, args.cases), body=body,
                                  mcfg=_measure_cfg(args), seed=args.seed)
    files = [outputs.write_dict_rows(out / "sweep_distance.csv", rows)]
    r = np.array([x["range_km"] for x in rows])
    files.append(outputs.line_plot(out / "sweep_distance.svg", r,
                                   {"error / range": [x["err_frac"] for x in rows],
                                    "3-sigma / range": [x["bound_frac"] for x in rows]},
                                   "range (km)", "fraction of range", logy=True, hline=0.1))
    cross = harness.crossing_range(rows, 0.1)
    config = {"min_km": args.min, "max_km": args.max, "cases": args.cases, "shape_ratios": list(args.shape),
              "noise": args.noise}
    outputs.write_manifest(out, "sweep-distance", config, args.seed, files)
    print(f"sweep-distance: 3-sigma bound reaches 10% of range at {cross:.3g} km")
    return 0


def cmd_sweep_angle(args) -> int:
    out = _out(args)
    if args.cases < 2 or not args.distance > 0:
        raise UsageError("need --cases >= 2 and --distance > 0")
    rows = harness.sweep_angle(np.linspace(-90.0, 90.0, args.cases), distance_km=args.distance,
                               body=_body(args), mcfg=_measure_cfg(args), seed=args.seed)
    files = [outputs.write_dict_rows(out / "sweep_angle.csv", rows)]
    a = np.array([x["angle_deg"] for x in rows])
    files.append(outputs.line_plot(out / "sweep_angle.svg", a,
                                   {"error (km)": [x["err_km"] for x in rows],
                                    "3-sigma (km)": [x["bound_km"] for x in rows]},
                                   "angle from side-on toward +x (deg)", "km", logy=True))
    invalid = [x["angle_from_x_deg"] for x in rows if not x["valid"]]
    config = {"distance_km": args.distance, "cases": args.cases, "shape_ratios": list(args.shape),
              "noise": args.noise}
    outputs.write_manifest(out, "sweep-angle", config, args.seed, files)
    if invalid:
        print(f"sweep-angle: {len(invalid)} invalid, up to {max(invalid):.1f} deg from +x")
    else:
        print("sweep-angle: no invalid measurements")
    return 0


def _scenario(args) -> ScenarioConfig:
    cfg = harness.load_scenario(args.scenario)
    if getattr(args, "mode", None):
        cfg = cfg.replace(controller_mode=args.mode)
    return cfg


def cmd_run(args) -> int:
    out = _out(args)
    cfg = _scenario(args)
    seed = cfg.seed if args.seed is None else args.seed
    res = harness.run_closed_loop(cfg, trial=args.trial, base_seed=seed)
    files = outputs.write_trial(out, res)
    (out / "scenario.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    files.append(out / "scenario.json")
    files += outputs.trial_plots(out, res.t / 3600.0, res.err_norm, res.bound, res.angle_deg, res.truth[:, :3])
    outputs.write_manifest(out, "run", cfg.to_dict(), {"base_seed": seed, "trial": args.trial}, files)
    print(f"run {cfg.name} ({cfg.controller_mode}): {res.verdict}"
          + (f" [{res.reason}]" if res.reason else "")
          + f" dv={res.delta_v:.4g} m/s fuel={res.fuel_mass:.4g} kg")
    return 0


def cmd_monte_carlo(args) -> int:
    out = _out(args)
    cfg = _scenario(args)
    if args.trials < 1 or args.workers < 1:
        raise UsageError("--trials and --workers must be >= 1")
    seed = cfg.seed if args.seed is None else args.seed
    stats = harness.run_monte_carlo(cfg, args.trials, seed, workers=args.workers)
    files = outputs.write_campaign(out, stats)
    files.append(outputs.hist_plot(out / "delta_v_hist.svg", stats.delta_v, "delta-v (m/s)"))
    q = stats.err_quantiles
    files.append(outputs.line_plot(out / "error_envelope.svg", q[:, 0],
                                   {"error q50": q[:, 1], "error q90": q[:, 2],
                                    "3-sigma q50": q[:, 3], "3-sigma q90": q[:, 4]},
                                   "time (h)", "km", logy=True))
    outputs.write_manifest(out, "monte-carlo", cfg.to_dict(), seed, files)
    print(f"monte-carlo {cfg.name} ({cfg.controller_mode}): {stats.n_success}/{stats.n_trials} success, "
          f"inside 3-sigma {stats.inside_fraction:.3f}, median dv {np.median(stats.delta_v):.4g} m/s")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise UsageError(f"not a directory: {run_dir}")
    lines = [f"# sbnav report: {run_dir.name}", ""]
    found = False
    mf = run_dir / "manifest.json"
    if mf.exists():
        m = json.loads(mf.read_text())
        lines += [f"- command: `{m['command']}`", f"- config sha256: `{m['config_sha256']}`",
                  f"- seed: `{json.dumps(m['seed'])}`", ""]
    ts = run_dir / "trial_summary.json"
    if ts.exists():
        found = True
        s = json.loads(ts.read_text())
        lines += ["## Trial", ""] + [f"- {k}: {s[k]}" for k in sorted(s)] + [""]
    cs = run_dir / "campaign_stats.csv"
    if cs.exists():
        found = True
        c = outputs.read_csv(cs)
        lines += ["## Campaign", "", "| metric | value |", "|---|---|"]
        lines += [f"| {k} | {v} |" for k, v in zip(c["metric"], c["value"])] + [""]
    for name, key in (("sweep_distance.csv", "range_km"), ("sweep_angle.csv", "angle_deg")):
        p = run_dir / name
        if p.exists():
            found = True
            d = outputs.read_csv(p)
            valid = d["valid"] > 0
            lines += [f"## {name[:-4].replace('_', ' ')}", "",
                      f"- cases: {len(valid)}, valid: {int(valid.sum())}",
                      f"- median error: {np.nanmedian(d['err_km']):.4g} km",
                      f"- median 3-sigma bound: {np.nanmedian(d['bound_km']):.4g} km"]
            if key == "range_km":
                rows = [{"range_km": r, "valid": v, "bound_km": b}
                        for r, v, b in zip(d["range_km"], valid, d["bound_km"])]
                lines.append(f"- bound reaches 10% of range at: {harness.crossing_range(rows):.4g} km")
            lines.append("")
    if not found:
        raise UsageError(f"no sbnav outputs found in {run_dir}")
    svgs = sorted(p.name for p in run_dir.glob("*.svg"))
    if svgs:
        lines += ["## Plots", ""] + [f"![{s}]({s})" for s in svgs] + [""]
    out = run_dir / "report.md"
    out.write_text("\n".join(lines))
    print(f"report written to {out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbnav", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def imaging_opts(p):
        p.add_argument("--shape", type=float, nargs=3, default=(1.0, 1.0, 1.0), metavar=("A", "B", "C"))
        p.add_argument("--noise", type=float, default=0.01)
        p.add_argument("--static", action="store_true", help="non-rotating body")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("render", help="render one image and measure it")
    p.add_argument("--position", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"),
                   help="spacecraft Hill position (km)")
    p.add_argument("--t", type=float, default=0.0, help="epoch (s) for the body rotation")
    imaging_opts(p)
    p.add_argument("--out", default="sbnav-render")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sweep-distance", help="side-on OpNav error versus range")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--min", type=float, default=1.0)
    p.add_argument("--max", type=float, default=30.0)
    imaging_opts(p)
    p.add_argument("--out", default="sbnav-sweep-distance")
    p.set_defaults(func=cmd_sweep_distance)

    p = sub.add_parser("sweep-angle", help="OpNav error versus phase angle")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--distance", type=float, default=5.0)
    imaging_opts(p)
    p.add_argument("--out", default="sbnav-sweep-angle")
    p.set_defaults(func=cmd_sweep_angle)

    def scenario_opts(p, default):
        p.add_argument("--scenario", default=default,
                       help="JSON config path or bundled name (%s)" % ", ".join(harness.bundled_scenarios()))
        g = p.add_mutually_exclusive_group()
        g.add_argument("--constrained", dest="mode", action="store_const", const="constrained")
        g.add_argument("--unconstrained", dest="mode", action="store_const", const="unconstrained")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("run", help="one closed-loop trial")
    scenario_opts(p, "stationkeeping")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", default="sbnav-run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("monte-carlo", help="seeded campaign of closed-loop trials")
    scenario_opts(p, "stationkeeping")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="sbnav-monte-carlo")
    p.set_defaults(func=cmd_monte_carlo)

    p = sub.add_parser("report", help="summarize a run directory as markdown")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"sbnav {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and fail
        log.debug("unhandled error", exc_info=True)
        print(f"sbnav {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
