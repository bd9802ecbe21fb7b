"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once before timing so JIT compilation is excluded.
Prints best-of-N wall time per call and the speed-up.
"""

import argparse
import time

import numpy as np

from sbnav import kernels
from sbnav.dynamics import bennu, srp_beta
from sbnav.imaging import CameraIntrinsics, CameraPose
from sbnav.opnav import ShapeMatrix, line_of_sight_matrix


def _cases():
    intr = CameraIntrinsics()
    body = bennu(shape_ratios=(2.5, 1.0, 1.0))
    pose = CameraPose.nadir(np.array([0.0, 0.0, -2.0]))
    axes = body.semi_axes
    sun = np.array([-1.0, 0.0, 0.0])
    shade_args = (np.array([300, 700]), np.array([300, 700]), pose.position, pose.hill_from_camera,
                  float(intr.focal), float(intr.u_p), axes, sun)

    rng = np.random.default_rng(0)
    img = rng.random((400, 400))

    ang = np.linspace(0.0, np.pi, 400)
    pix = np.column_stack([500 + 120 * np.cos(ang), 500 + 120 * np.sin(ang)])
    shape = ShapeMatrix(tuple(axes))
    att = pose.hill_from_camera.T
    jac_args = (pix, line_of_sight_matrix(intr), shape.D @ att.T, att @ shape.D_inv, 0.01)

    x0 = np.array([0.02, 0.01, -0.03, 0.0, 0.05, 0.0])
    beta = float(srp_beta(body)[0])
    model = np.array([1.0, 1.0])
    u = np.zeros(3)
    rk_args = (x0, beta, u, model, 1e-5, 90)
    cov_args = (x0, np.eye(6) * 1e-6, beta, u, model, 1e-5, 90)
    return {
        "shade_ellipsoid (400x400 px)": ("shade_ellipsoid", shade_args),
        "gradient_magnitude (400x400)": ("gradient_magnitude", (img,)),
        "limb_jacobian (400 points)": ("limb_jacobian", jac_args),
        "rk4 (90 steps)": ("rk4", rk_args),
        "rk4_cov (90 steps)": ("rk4_cov", cov_args),
    }


def best_time(fn, args, repeat):
    fn(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speed-up':>9s}")
    for label, (name, fargs) in _cases().items():
        t_np = best_time(getattr(kernels, name + "_numpy"), fargs, args.repeat)
        t_nb = best_time(getattr(kernels, name + "_numba"), fargs, args.repeat)
        print(f"{label:32s} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:9.1f}")


if __name__ == "__main__":
    main()
