"""Batch command line: stylize one mesh and optionally emit per-iteration stats.

Exit codes: 0 success, 1 file/mesh/solver errors, 2 invalid flag
combinations (argparse uses 2 for bad usage as well).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .errors import NormStyleError
from .mesh import (
    load_obj,
    normalize_mesh,
    save_obj,
    surface_centroid,
    total_area,
)
from .solver import SolverParams, element_normals, solve
from .stylefield import (
    AnalyticSphere,
    axis_normal_set,
    build_target_normals,
    conformalized_mcf,
    decode_normcap,
    primitive_normal_set,
)

FLOW_STYLES = ("developable", "polycube")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stylize",
        description="Deform a triangle mesh so its normals match a style field.",
    )
    p.add_argument("-i", "--input", required=True, help="input OBJ path")
    p.add_argument("-o", "--output", required=True, help="output OBJ path")
    p.add_argument(
        "--style",
        required=True,
        help="sphere | cube | icosahedron | tetrahedron | polytope:PATH | "
        "mesh:PATH | normcap:PATH | developable | polycube",
    )
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="normal-term weight (mesh is normalized to unit area)")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--tolerance", type=float, default=1e-5,
                   help="relative energy change at which to stop")
    p.add_argument("--reg", choices=("arap", "farap", "acap"), default=None,
                   help="regularization (default: arap; developable/polycube: farap)")
    p.add_argument("--dynamic-t", action="store_true",
                   help="rebuild targets from the deformed normals every iteration")
    p.add_argument("--crease-threshold", type=float, default=0.1,
                   help="developable style: eigenvalue ratio controlling crease amount")
    p.add_argument("--stats", default=None, help="CSV path for per-iteration stats")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for any stochastic tooling (unused by the solver)")
    return p


def _resolve_regularization(style: str, reg: str | None) -> str:
    if style == "developable":
        if reg not in (None, "farap"):
            raise FlagError("--style developable requires --reg farap")
        return "farap"
    if style == "polycube":
        if reg not in (None, "arap", "farap"):
            raise FlagError("--style polycube requires --reg arap or farap")
        return reg or "farap"
    return reg or "arap"


class FlagError(Exception):
    """Invalid flag combination (exit code 2)."""


def _load_style(spec: str):
    if spec == "sphere":
        return AnalyticSphere()
    if spec in ("cube", "icosahedron", "tetrahedron"):
        return primitive_normal_set(spec)
    if spec.startswith("polytope:"):
        path = spec.split(":", 1)[1]
        dirs = np.loadtxt(path, ndmin=2)
        return axis_normal_set(dirs)
    if spec.startswith("mesh:"):
        style_mesh = load_obj(spec.split(":", 1)[1])
        return conformalized_mcf(style_mesh)
    if spec.startswith("normcap:"):
        from PIL import Image

        path = spec.split(":", 1)[1]
        with Image.open(path) as im:
            return decode_normcap(im)
    raise FlagError(f"unknown style {spec!r}")


class _StatsRecorder:
    """Collects (iteration, energy, mean angle to targets in degrees)."""

    def __init__(self, faces, mode, target_lookup):
        self.faces = faces
        self.mode = mode
        self.target_lookup = target_lookup
        self.rows: list[tuple[int, float, float]] = []

    def __call__(self, iteration: int, positions: np.ndarray, e: float) -> None:
        n = element_normals(positions, self.faces, self.mode)
        t = self.target_lookup(positions, n)
        ang = np.degrees(np.arccos(np.clip(np.einsum("ij,ij->i", n, t), -1.0, 1.0)))
        self.rows.append((iteration, float(e), float(ang.mean())))

    def write(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "energy", "meanNormalAngleDeg"])
            for row in self.rows:
                writer.writerow([row[0], repr(row[1]), repr(row[2])])


def run(args) -> int:
    reg = _resolve_regularization(args.style, args.reg)
    mesh = load_obj(args.input)
    centroid = surface_centroid(mesh)
    scale = np.sqrt(total_area(mesh))
    normalized = normalize_mesh(mesh)

    params = SolverParams(
        lambda_=args.lam,
        regularization=reg,
        max_iterations=max(args.iterations, 1),
        convergence_tol=args.tolerance,
        dynamic_targets=args.dynamic_t,
    )

    if args.iterations == 0:
        out_positions = normalized.positions
        recorder = None
    elif args.style in FLOW_STYLES:
        out_positions, recorder = _run_flow(args, normalized, params)
    else:
        style = _load_style(args.style)
        recorder = None
        if args.stats:
            recorder = _StatsRecorder(
                normalized.faces,
                params.mode,
                lambda P, n: build_target_normals(style, n, params.mode).vectors,
            )
        state = solve(normalized, style, params, callback=recorder)
        out_positions = state.U

    if recorder is not None and args.stats:
        recorder.write(args.stats)

    result = mesh.with_positions(out_positions * scale + centroid)
    save_obj(result, args.output)
    return 0


def _run_flow(args, normalized, params):
    from .energies import (
        DevelopableParams,
        PolyCubeParams,
        developable_flow,
        developable_targets,
        polycube_flow,
    )
    recorder = None
    if args.style == "developable":
        dev = DevelopableParams(crease_threshold=args.crease_threshold)
        if args.stats:
            recorder = _StatsRecorder(
                normalized.faces,
                "face",
                lambda P, n: developable_targets(
                    P, normalized.faces, dev.crease_threshold
                ).vectors,
            )
        state = developable_flow(normalized, dev, params, callback=recorder)
    else:
        pc = PolyCubeParams()
        if args.stats:
            recorder = _StatsRecorder(
                normalized.faces, params.mode, lambda P, n: pc.axes.lookup(n)
            )
        state = polycube_flow(normalized, pc, params, callback=recorder)
    return state.U, recorder


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = os.environ.get("NA_THREADS")
        if threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=int(threads)):
                return run(args)
        return run(args)
    except FlagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NormStyleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
