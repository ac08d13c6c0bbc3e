"""Local/global solver for normal-driven deformation.

Minimizes, over deformed positions U and per-element rotations R (plus
per-element scales s for the conformal variant),

    sum_k  sum_{(i,j) in N_k} w_ij |R_k e_ij - e'_ij|^2
         + lambda * a_k * |R_k n_k - t_k|^2

where N_k is the spokes-and-rims edge set of vertex k (or the three
edges of face k for the face-only variant), e/e' are rest/deformed edge
vectors, n_k the rest element normal and t_k its target.  The local step
fits each R_k by orthogonal Procrustes (3x3 SVD); the global step solves
one prefactorized sparse SPD system for U.  A single pinned vertex
removes the translation null space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationError, NonFiniteError, SolveError
from .mesh import (
    TriangleMesh,
    _EDGE_DST,
    _EDGE_SRC,
    face_areas,
    face_edge_weights,
    face_normals,
    vertex_areas,
    vertex_normals,
)
from .stylefield import StyleField, TargetNormals, build_target_normals

REGULARIZATIONS = ("arap", "farap", "acap")

# when the Procrustes determinant flip is ambiguous (two near-equal
# trailing singular values) the previous iteration's rotation is kept
_SVD_TIE_EPS = 1e-12


@dataclass
class SolverParams:
    """Knobs of the optimization.

    lambda_ balances the normal term against the regularizer (meshes are
    expected at unit surface area, which makes values transferable).
    ``pinned_vertex`` None picks the vertex nearest the vertex centroid.
    """

    lambda_: float = 1.0
    regularization: str = "arap"
    max_iterations: int = 500
    convergence_tol: float = 1e-5
    dynamic_targets: bool = False
    pinned_vertex: int | None = None

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be >= 0")
        if self.regularization not in REGULARIZATIONS:
            raise ValueError(f"regularization must be one of {REGULARIZATIONS}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be > 0")

    @property
    def mode(self) -> str:
        """Element mode: rotations per 'face' (farap) or per 'vertex'."""
        return "face" if self.regularization == "farap" else "vertex"


@dataclass
class SolverState:
    """Deformed positions, per-element rotations/scales, energy trace."""

    U: np.ndarray
    R: np.ndarray
    s: np.ndarray | None
    energy_history: list[float] = field(default_factory=list)
    iteration: int = 0


@dataclass
class Precomputed:
    """Constant matrices and cached rest quantities for one mesh."""

    mode: str
    faces: np.ndarray
    rest_positions: np.ndarray
    edge_src: np.ndarray      # (F,3) vertex index each face edge leaves
    edge_dst: np.ndarray      # (F,3) vertex index each face edge enters
    rest_edges: np.ndarray    # (F,3,3) rest edge vectors
    weights: np.ndarray       # (F,3) cotangent weight per face edge
    rest_edge_energy: np.ndarray  # (F,) sum_e w_e |e|^2
    areas: np.ndarray         # (m,) element areas
    rest_normals: np.ndarray  # (m,3) rest element unit normals
    incidence: sp.csr_matrix | None  # (V,F) vertex-face incidence, vertex mode
    Q: sp.csr_matrix          # (V,V) global matrix before the gauge fix
    K_T: sp.csr_matrix        # (V,3m) maps stacked rotations to the RHS
    pin: int
    pin_value: np.ndarray
    q_pin: np.ndarray         # dense column Q[:,pin], for the RHS correction
    lu: spla.SuperLU

    @property
    def n_elements(self) -> int:
        return len(self.areas)


def precompute(mesh: TriangleMesh, params: SolverParams) -> Precomputed:
    """Assemble and factorize the global system for one mesh.

    Q accumulates, over every element's edge set, the weighted graph
    Laplacian of that set; K holds the matching constant edge blocks so
    the global right-hand side is a single sparse product with the
    stacked rotations.
    """
    V, F = mesh.positions, mesh.faces
    nV, nF = len(V), len(F)
    mode = params.mode

    edge_src = F[:, _EDGE_SRC].astype(np.int64)
    edge_dst = F[:, _EDGE_DST].astype(np.int64)
    rest_edges = V[edge_dst] - V[edge_src]
    weights = face_edge_weights(V, F)

    if mode == "vertex":
        areas = vertex_areas(V, F)
        rest_normals = vertex_normals(V, F)
        m = nV
        # every face edge appears in the edge set of each of the face's
        # three vertices
        multiplicity = 3.0
        incidence = sp.coo_matrix(
            (
                np.ones(3 * nF),
                (F.ravel(), np.repeat(np.arange(nF), 3)),
            ),
            shape=(nV, nF),
        ).tocsr()
    else:
        areas = face_areas(V, F)
        rest_normals = face_normals(V, F)
        m = nF
        multiplicity = 1.0
        incidence = None

    ii, jj = edge_src.ravel(), edge_dst.ravel()
    ww = multiplicity * weights.ravel()
    Q = sp.coo_matrix(
        (
            np.concatenate([-ww, -ww, ww, ww]),
            (
                np.concatenate([ii, jj, ii, jj]),
                np.concatenate([jj, ii, ii, jj]),
            ),
        ),
        shape=(nV, nV),
    ).tocsr()

    K_T = _assemble_k_transpose(
        nV, m, F, edge_src, edge_dst, rest_edges, weights, mode
    )

    if params.pinned_vertex is not None:
        pin = int(params.pinned_vertex)
        if not 0 <= pin < nV:
            raise ValueError("pinned_vertex out of range")
    else:
        pin = int(np.argmin(np.linalg.norm(V - V.mean(axis=0), axis=1)))
    q_pin = np.asarray(Q[:, pin].todense()).ravel()

    keep = np.ones(nV)
    keep[pin] = 0.0
    D = sp.diags(keep)
    one_pin = np.zeros(nV)
    one_pin[pin] = 1.0
    Q_fixed = (D @ Q @ D + sp.diags(one_pin)).tocsc()
    try:
        lu = spla.splu(Q_fixed)
    except RuntimeError as exc:
        raise FactorizationError(f"global matrix factorization failed: {exc}") from exc

    return Precomputed(
        mode=mode,
        faces=F,
        rest_positions=V.copy(),
        edge_src=edge_src,
        edge_dst=edge_dst,
        rest_edges=rest_edges,
        weights=weights,
        rest_edge_energy=np.einsum("fe,fed,fed->f", weights, rest_edges, rest_edges),
        areas=areas,
        rest_normals=rest_normals,
        incidence=incidence,
        Q=Q,
        K_T=K_T,
        pin=pin,
        pin_value=V[pin].copy(),
        q_pin=q_pin,
        lu=lu,
    )


def _assemble_k_transpose(nV, m, F, edge_src, edge_dst, rest_edges, weights, mode):
    """Sparse (V, 3m): columns 3k..3k+2 hold sum over element k's edges of
    w * (indicator_j - indicator_i) * rest_edge^T."""
    nF = len(F)
    coords = np.arange(3)
    if mode == "vertex":
        # axes: (face, edge, corner, coord)
        shape = (nF, 3, 3, 3)
        rows_i = np.broadcast_to(edge_src[:, :, None, None], shape)
        rows_j = np.broadcast_to(edge_dst[:, :, None, None], shape)
        elem = np.broadcast_to(F[:, None, :, None].astype(np.int64), shape)
        cols = 3 * elem + coords[None, None, None, :]
        vals = np.broadcast_to(
            (weights[:, :, None] * rest_edges)[:, :, None, :], shape
        )
    else:
        # axes: (face, edge, coord); element = face
        shape = (nF, 3, 3)
        rows_i = np.broadcast_to(edge_src[:, :, None], shape)
        rows_j = np.broadcast_to(edge_dst[:, :, None], shape)
        elem = np.broadcast_to(np.arange(nF, dtype=np.int64)[:, None, None], shape)
        cols = 3 * elem + coords[None, None, :]
        vals = weights[:, :, None] * rest_edges

    rows = np.concatenate([rows_i.ravel(), rows_j.ravel()])
    cols = np.concatenate([cols.ravel(), cols.ravel()])
    data = np.concatenate([-vals.ravel(), vals.ravel()])
    return sp.coo_matrix((data, (rows, cols)), shape=(nV, 3 * m)).tocsr()


# ---------------------------------------------------------------------------
# Local step
# ---------------------------------------------------------------------------

def _deformed_edges(U: np.ndarray, pre: Precomputed) -> np.ndarray:
    return U[pre.edge_dst] - U[pre.edge_src]


def fit_rotations(X: np.ndarray, prev_R: np.ndarray | None = None) -> np.ndarray:
    """Batched Procrustes: R maximizing trace(R X) over SO(3), via SVD.

    The reflection case flips the sign of the smallest singular value's
    left column; if that flip is ambiguous (near-equal trailing singular
    values) the previous rotation is kept when available.
    """
    Us, S, Vt = np.linalg.svd(X)
    R = np.matmul(Vt.transpose(0, 2, 1), Us.transpose(0, 2, 1))
    neg = np.linalg.det(R) < 0
    if np.any(neg):
        Uf = Us[neg].copy()
        Uf[:, :, 2] *= -1.0
        R[neg] = np.matmul(Vt[neg].transpose(0, 2, 1), Uf.transpose(0, 2, 1))
        if prev_R is not None:
            tie = neg & (S[:, 1] - S[:, 2] < _SVD_TIE_EPS)
            if np.any(tie):
                R[tie] = prev_R[tie]
    return R


def local_step(
    U: np.ndarray,
    pre: Precomputed,
    targets: TargetNormals,
    params: SolverParams,
    prev_R: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Fit per-element rotations (and scales for the conformal variant).

    Assembles X_k = sum w e e'^T + lambda a n t^T per element and solves
    the Procrustes problems in one batched SVD.
    """
    E_def = _deformed_edges(U, pre)
    C = np.einsum("fe,fed,feg->fdg", pre.weights, pre.rest_edges, E_def)
    if pre.mode == "vertex":
        X = (pre.incidence @ C.reshape(-1, 9)).reshape(-1, 3, 3)
    else:
        X = C
    lam_a = params.lambda_ * pre.areas
    X = X + lam_a[:, None, None] * (
        pre.rest_normals[:, :, None] * targets.vectors[:, None, :]
    )
    R = fit_rotations(X, prev_R)
    s = None
    if params.regularization == "acap":
        s = _fit_scales(E_def, pre, targets, params, R)
    return R, s


def _fit_scales(E_def, pre, targets, params, R) -> np.ndarray:
    """Optimal uniform scale per element for the conformal energy.

    s_k = (sum w e'.(R e) + lambda a t.(R n)) / (sum w |e|^2 + lambda a),
    clamped away from zero.
    """
    F = pre.faces
    nV = len(pre.rest_positions)
    C = np.einsum("fe,fed,feg->fdg", pre.weights, E_def, pre.rest_edges)
    tr = np.einsum("fcdg,fdg->fc", R[F], C)
    num = np.bincount(F.ravel(), tr.ravel(), minlength=nV)
    den = np.bincount(F.ravel(), np.repeat(pre.rest_edge_energy, 3), minlength=nV)
    lam_a = params.lambda_ * pre.areas
    num = num + lam_a * np.einsum(
        "md,mdg,mg->m", targets.vectors, R, pre.rest_normals
    )
    den = den + lam_a
    return np.clip(num / den, 1e-6, None)


# ---------------------------------------------------------------------------
# Global step
# ---------------------------------------------------------------------------

def global_step(
    R: np.ndarray, pre: Precomputed, s: np.ndarray | None = None
) -> np.ndarray:
    """Positions minimizing the regularizer for fixed rotations.

    Solves the gauge-fixed system Q U = K^T R^T; scales fold into the
    rotations.  The pinned vertex keeps its rest position.
    """
    folded = R if s is None else s[:, None, None] * R
    r_stack = folded.transpose(0, 2, 1).reshape(-1, 3)
    b = pre.K_T @ r_stack
    b = b - np.outer(pre.q_pin, pre.pin_value)
    b[pre.pin] = pre.pin_value
    U = pre.lu.solve(b)
    if not np.all(np.isfinite(U)):
        raise SolveError("global back-substitution produced non-finite positions")
    return U


def energy(
    U: np.ndarray,
    R: np.ndarray,
    pre: Precomputed,
    targets: TargetNormals,
    params: SolverParams,
    s: np.ndarray | None = None,
) -> float:
    """Total objective at (U, R, s) for the given targets.

    Expands |sRe - e'|^2 = s^2|e|^2 + |e'|^2 - 2 e'.(sRe) so only the
    cross term needs the rotations (R orthogonal).
    """
    folded = R if s is None else s[:, None, None] * R
    E_def = _deformed_edges(U, pre)
    wee_rest = pre.rest_edge_energy
    wee_def = np.einsum("fe,fed,fed->f", pre.weights, E_def, E_def)
    # cross[f] = <., sum over element's rotations of w e'_d e_g>
    C = np.einsum("fe,fed,feg->fdg", pre.weights, E_def, pre.rest_edges)
    if pre.mode == "vertex":
        if s is None:
            rest_part = 3.0 * wee_rest.sum()
        else:
            rest_part = float(np.einsum("f,fc->", wee_rest, s[pre.faces] ** 2))
        rot_sum = folded[pre.faces].sum(axis=1)
        cross = float(np.einsum("fdg,fdg->", rot_sum, C))
        e_reg = rest_part + 3.0 * wee_def.sum() - 2.0 * cross
    else:
        rest_part = float(wee_rest.sum() if s is None else (wee_rest * s**2).sum())
        cross = float(np.einsum("fdg,fdg->", folded, C))
        e_reg = rest_part + wee_def.sum() - 2.0 * cross
    rn = np.einsum("mdg,mg->md", folded, pre.rest_normals)
    dev = rn - targets.vectors
    e_norm = float(params.lambda_ * np.sum(pre.areas * np.einsum("md,md->m", dev, dev)))
    return e_reg + e_norm


# ---------------------------------------------------------------------------
# Full optimization loop
# ---------------------------------------------------------------------------

def element_normals(positions: np.ndarray, faces: np.ndarray, mode: str) -> np.ndarray:
    """Current unit normals in the solver's element mode."""
    if mode == "vertex":
        return vertex_normals(positions, faces)
    return face_normals(positions, faces)


def _identity_rotations(m: int) -> np.ndarray:
    return np.broadcast_to(np.eye(3), (m, 3, 3)).copy()


def solve(
    mesh: TriangleMesh,
    style: StyleField | None,
    params: SolverParams,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
    target_fn: Callable[[np.ndarray], TargetNormals] | None = None,
) -> SolverState:
    """Run the full local/global loop from the rest state.

    Targets come from the style field evaluated at the mesh's element
    normals, or from ``target_fn(positions)`` for energy-defined styles.
    With dynamic targets they are rebuilt from the deformed normals after
    every iteration.  The callback observes (iteration, read-only
    positions, energy) once per iteration.  Stops when the relative
    energy change drops below ``convergence_tol``.
    """
    if (style is None) == (target_fn is None):
        raise ValueError("provide exactly one of style or target_fn")
    pre = precompute(mesh, params)

    if target_fn is not None:
        targets = target_fn(mesh.positions)
    else:
        targets = build_target_normals(style, pre.rest_normals, pre.mode)

    U = mesh.positions.copy()
    R = _identity_rotations(pre.n_elements)
    s = np.ones(pre.n_elements) if params.regularization == "acap" else None
    state = SolverState(U=U, R=R, s=s)
    state.energy_history.append(energy(U, R, pre, targets, params, s))

    for it in range(1, params.max_iterations + 1):
        R, s = local_step(U, pre, targets, params, prev_R=R)
        U = global_step(R, pre, s)
        e = energy(U, R, pre, targets, params, s)
        if not (np.isfinite(e) and np.all(np.isfinite(U))):
            raise NonFiniteError(f"non-finite state at iteration {it}")
        state.U, state.R, state.s, state.iteration = U, R, s, it
        state.energy_history.append(e)
        if callback is not None:
            view = U.view()
            view.setflags(write=False)
            callback(it, view, e)
        if params.dynamic_targets:
            if target_fn is not None:
                targets = target_fn(U)
            else:
                targets = build_target_normals(
                    style, element_normals(U, pre.faces, pre.mode), pre.mode
                )
        prev_e = state.energy_history[-2]
        if abs(e - prev_e) <= params.convergence_tol * max(abs(prev_e), 1e-12):
            break
    return state


def write_energy_csv(history, path) -> None:
    """Energy history as CSV with columns iteration,energy."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "energy"])
        for i, e in enumerate(history):
            writer.writerow([i, repr(float(e))])
