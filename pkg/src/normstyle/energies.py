"""Energy-defined styles: developable target normals and polycube flows.

Unlike exemplar styles, these produce targets from the current deformed
geometry, so both flows run with dynamic targets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import (
    TriangleMesh,
    angle_defects,
    dihedral_angles,
    face_areas,
    face_normals,
)
from .solver import (
    SolverParams,
    SolverState,
    element_normals,
    energy,
    global_step,
    local_step,
    precompute,
    solve,
)
from .stylefield import DiscreteNormalSet, TargetNormals, axis_normal_set


@dataclass
class DevelopableParams:
    """One knob: the eigenvalue ratio below which a one-ring's normals are
    collapsed to the dominant direction (flattening) rather than projected
    into the dominant plane (crease-preserving).  Lower values keep more
    creases."""

    crease_threshold: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.crease_threshold < 1.0:
            raise ValueError("crease_threshold must lie in (0,1)")


@dataclass
class PolyCubeParams:
    """Axis set to snap to, plus the triangle-quality rescue settings."""

    axes: DiscreteNormalSet = field(default_factory=lambda: axis_normal_set("cube"))
    quality_threshold: float = 0.05
    smoothing_step: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.quality_threshold <= 1.0:
            raise ValueError("quality_threshold must lie in (0,1]")
        if not 0.0 < self.smoothing_step < 1.0:
            raise ValueError("smoothing_step must lie in (0,1)")


# ---------------------------------------------------------------------------
# Developable targets
# ---------------------------------------------------------------------------

def ring_normal_moments(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Per-vertex area-weighted second moment of one-ring face normals."""
    nV = len(positions)
    nf = face_normals(positions, faces)
    fa = face_areas(positions, faces)
    outer = fa[:, None, None] * (nf[:, :, None] * nf[:, None, :])
    inc = sp.coo_matrix(
        (np.ones(3 * len(faces)), (faces.ravel(), np.repeat(np.arange(len(faces)), 3))),
        shape=(nV, len(faces)),
    ).tocsr()
    return (inc @ outer.reshape(-1, 9)).reshape(-1, 3, 3)


def ring_projected_normals(
    positions: np.ndarray,
    faces: np.ndarray,
    crease_threshold: float = 0.1,
) -> np.ndarray:
    """(F, 3 corners, 3) face normals projected by each corner's ring rule.

    Per vertex: eigendecompose the one-ring normal moment (l1 >= l2 >= l3).
    One-ring normals of a developable patch lie in a plane through the
    origin, so the smallest eigenvector approximates the local ruling
    direction.  If l2/l1 < crease_threshold the ring is dominated by one
    direction: zero the normal components along the two smallest
    eigenvectors (local flattening).  Otherwise zero only the smallest
    component, keeping the normals spread within their best-fit plane
    (hinges and existing creases are fixed points).  Degenerate rings
    (l1 ~ 0) keep their normals; projections are renormalized.
    """
    nf = face_normals(positions, faces)
    moment = ring_normal_moments(positions, faces)
    evals, evecs = np.linalg.eigh(moment)  # ascending
    l1, l2 = evals[:, 2], evals[:, 1]
    v1 = evecs[:, :, 2]
    v3 = evecs[:, :, 0]

    degenerate = l1 < 1e-12
    collapse = (l2 < crease_threshold * l1) & ~degenerate

    proj = np.empty((len(faces), 3, 3))  # (face, corner, coord)
    for c in range(3):
        vidx = faces[:, c]
        n = nf
        p = n - np.einsum("fd,fd->f", n, v3[vidx])[:, None] * v3[vidx]
        two = collapse[vidx]
        p[two] = (
            np.einsum("fd,fd->f", n[two], v1[vidx][two])[:, None] * v1[vidx][two]
        )
        keep = degenerate[vidx]
        p[keep] = n[keep]
        lens = np.linalg.norm(p, axis=1)
        tiny = lens < 1e-12
        p[tiny] = n[tiny]
        lens[tiny] = 1.0
        proj[:, c, :] = p / lens[:, None]
    return proj


def developable_targets(
    positions: np.ndarray,
    faces: np.ndarray,
    crease_threshold: float = 0.1,
) -> TargetNormals:
    """Per-face target normals that locally flatten toward developability.

    Each face averages (and renormalizes) the three projected normals it
    receives from its corners' one-ring rules.
    """
    nf = face_normals(positions, faces)
    proj = ring_projected_normals(positions, faces, crease_threshold)
    t = proj.mean(axis=1)
    lens = np.linalg.norm(t, axis=1)
    tiny = lens < 1e-12
    t[tiny] = nf[tiny]
    lens[tiny] = 1.0
    return TargetNormals("face", t / lens[:, None])


def developable_flow(
    mesh: TriangleMesh,
    dev_params: DevelopableParams,
    solver_params: SolverParams,
    callback=None,
) -> SolverState:
    """Face-only regularized flow toward piecewise developable geometry.

    Targets are recomputed from the deformed normals every iteration.
    """
    if solver_params.regularization != "farap":
        raise ValueError("developable flow requires the farap regularization")
    params = SolverParams(
        lambda_=solver_params.lambda_,
        regularization="farap",
        max_iterations=solver_params.max_iterations,
        convergence_tol=solver_params.convergence_tol,
        dynamic_targets=True,
        pinned_vertex=solver_params.pinned_vertex,
    )
    tau = dev_params.crease_threshold
    return solve(
        mesh,
        style=None,
        params=params,
        callback=callback,
        target_fn=lambda P: developable_targets(P, mesh.faces, tau),
    )


# ---------------------------------------------------------------------------
# PolyCube flow
# ---------------------------------------------------------------------------

def triangle_quality(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """q = 2 * inradius / circumradius per face; 1 for equilateral."""
    p = positions[faces]
    la = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    lb = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    lc = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    s = 0.5 * (la + lb + lc)
    area = face_areas(positions, faces)
    inradius = area / np.maximum(s, 1e-300)
    circum = la * lb * lc / np.maximum(4.0 * area, 1e-300)
    return 2.0 * inradius / np.maximum(circum, 1e-300)


def _rescue_vertices(
    positions: np.ndarray, faces: np.ndarray, params: PolyCubeParams
) -> np.ndarray:
    """Pull vertices of low-quality faces toward their one-ring average.

    The move is kept only where it does not lower the minimum quality of
    the touched faces, so the rescue can only improve or leave positions
    unchanged.
    """
    q = triangle_quality(positions, faces)
    bad_faces = q < params.quality_threshold
    if not np.any(bad_faces):
        return positions
    bad_verts = np.unique(faces[bad_faces].ravel())

    nV = len(positions)
    ring_sum = np.zeros((nV, 3))
    ring_cnt = np.zeros(nV)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        np.add.at(ring_sum, faces[:, a], positions[faces[:, b]])
        np.add.at(ring_sum, faces[:, b], positions[faces[:, a]])
        np.add.at(ring_cnt, faces[:, a], 1.0)
        np.add.at(ring_cnt, faces[:, b], 1.0)
    ring_avg = ring_sum / np.maximum(ring_cnt, 1.0)[:, None]

    candidate = positions.copy()
    candidate[bad_verts] = (
        (1.0 - params.smoothing_step) * positions[bad_verts]
        + params.smoothing_step * ring_avg[bad_verts]
    )
    touched = np.any(np.isin(faces, bad_verts), axis=1)
    before = triangle_quality(positions, faces)[touched].min()
    after = triangle_quality(candidate, faces)[touched].min()
    return candidate if after > before else positions


def axis_alignment_fraction(
    positions: np.ndarray,
    faces: np.ndarray,
    axes: DiscreteNormalSet,
    tol_deg: float,
) -> float:
    """Fraction of total face area whose normal lies within tol of an axis."""
    nf = face_normals(positions, faces)
    fa = face_areas(positions, faces)
    best = (nf @ axes.normals.T).max(axis=1)
    ok = best >= np.cos(np.radians(tol_deg))
    return float(fa[ok].sum() / fa.sum())


def polycube_flow(
    mesh: TriangleMesh,
    pc_params: PolyCubeParams,
    solver_params: SolverParams,
    callback=None,
    max_rebases: int = 30,
) -> SolverState:
    """Axis-snapping flow that refactorizes from the current geometry.

    Outer rounds treat the current positions as the rest state
    (re-assembling and re-factorizing the global system); within a round
    the local/global loop runs with the targets re-snapped from the
    deformed normals each iteration.  Re-basing intentionally destroys
    detail preservation, which drives the surface to flat axis-aligned
    panels.  Because flat panels leave tangential vertex drift
    energetically free, the loop tracks the best axis-aligned state seen
    and stops once alignment degrades, triangles collapse despite the
    rescue step, or displacement between rebases vanishes.
    """
    if solver_params.regularization not in ("arap", "farap"):
        raise ValueError("polycube flow requires arap or farap")
    params = SolverParams(
        lambda_=solver_params.lambda_,
        regularization=solver_params.regularization,
        max_iterations=1,
        convergence_tol=solver_params.convergence_tol,
        pinned_vertex=solver_params.pinned_vertex,
    )
    inner_budget = max(1, min(80, solver_params.max_iterations))
    tol_deg = 10.0

    U = mesh.positions.copy()
    state = SolverState(U=U.copy(), R=np.broadcast_to(np.eye(3), (1, 3, 3)).copy(), s=None)
    best = (-1.0, U.copy(), state.R, None)
    total_it = 0

    for _ in range(max_rebases):
        pre = precompute(mesh.with_positions(U), params)
        targets = TargetNormals(pre.mode, pc_params.axes.lookup(pre.rest_normals))
        R, s, e_prev = None, None, None
        for _ in range(inner_budget):
            R, s = local_step(U, pre, targets, params, prev_R=R)
            U = global_step(R, pre, s)
            e = energy(U, R, pre, targets, params, s)
            total_it += 1
            state.energy_history.append(e)
            if callback is not None:
                view = U.view()
                view.setflags(write=False)
                callback(total_it, view, e)
            targets = TargetNormals(
                pre.mode,
                pc_params.axes.lookup(element_normals(U, mesh.faces, pre.mode)),
            )
            if e_prev is not None and abs(e - e_prev) <= params.convergence_tol * max(
                abs(e_prev), 1e-12
            ):
                break
            e_prev = e
        U = _rescue_vertices(U, mesh.faces, pc_params)

        aligned = axis_alignment_fraction(U, mesh.faces, pc_params.axes, tol_deg)
        degenerated = (
            not np.all(np.isfinite(U))
            or triangle_quality(U, mesh.faces).min() < 1e-3
        )
        if not degenerated and aligned > best[0]:
            best = (aligned, U.copy(), R.copy(), None if s is None else s.copy())
        displacement = float(np.abs(U - pre.rest_positions).max())
        state.iteration = total_it
        if degenerated or aligned < best[0] - 1e-3:
            break
        if displacement < solver_params.convergence_tol:
            break

    _, state.U, state.R, state.s = best
    return state


# ---------------------------------------------------------------------------
# Crease statistics
# ---------------------------------------------------------------------------

def write_crease_stats_csv(mesh_positions, faces, path, bins: int = 36) -> None:
    """Histogram CSV of dihedral angles (degrees) and vertex angle defects.

    Columns: kind, bin_left, bin_right, count.
    """
    _, dih = dihedral_angles(mesh_positions, faces)
    defects = angle_defects(mesh_positions, faces)
    dih_hist, dih_edges = np.histogram(np.degrees(dih), bins=bins, range=(0.0, 180.0))
    de_hist, de_edges = np.histogram(defects, bins=bins)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "bin_left", "bin_right", "count"])
        for i, c in enumerate(dih_hist):
            writer.writerow(["dihedral_deg", dih_edges[i], dih_edges[i + 1], int(c)])
        for i, c in enumerate(de_hist):
            writer.writerow(["angle_defect", de_edges[i], de_edges[i + 1], int(c)])
