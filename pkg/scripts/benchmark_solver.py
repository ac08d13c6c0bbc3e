#!/usr/bin/env python3
"""Time precompute and per-iteration cost across mesh resolutions.

    python scripts/benchmark_solver.py
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from normstyle import primitives
from normstyle.mesh import normalize_mesh
from normstyle.solver import (
    SolverParams,
    energy,
    global_step,
    local_step,
    precompute,
)
from normstyle.stylefield import axis_normal_set, build_target_normals

CASES = [
    ("icosphere-3", lambda: primitives.icosphere(3)),
    ("icosphere-4", lambda: primitives.icosphere(4)),
    ("icosphere-5", lambda: primitives.icosphere(5)),
    ("torus-20k", lambda: primitives.torus(160, 125)),
    ("torus-40k", lambda: primitives.torus(200, 200)),
]


def bench(name, make, reg, n_iter=10):
    mesh = normalize_mesh(make())
    params = SolverParams(lambda_=2.0, regularization=reg)
    t0 = time.perf_counter()
    pre = precompute(mesh, params)
    t_pre = time.perf_counter() - t0
    targets = build_target_normals(axis_normal_set("cube"), pre.rest_normals, pre.mode)
    U = mesh.positions.copy()
    R = None
    R, s = local_step(U, pre, targets, params, prev_R=R)  # warm-up
    U = global_step(R, pre, s)
    t0 = time.perf_counter()
    for _ in range(n_iter):
        R, s = local_step(U, pre, targets, params, prev_R=R)
        U = global_step(R, pre, s)
        energy(U, R, pre, targets, params, s)
    rate = n_iter / (time.perf_counter() - t0)
    print(f"{name:<12} {reg:<6} |V|={mesh.n_vertices:<7d} "
          f"precompute {t_pre * 1e3:7.1f} ms   {rate:6.1f} it/s")


def main():
    for name, make in CASES:
        for reg in ("arap", "farap"):
            bench(name, make, reg)


if __name__ == "__main__":
    main()
