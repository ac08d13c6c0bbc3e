import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from normstyle import primitives
from normstyle.mesh import (
    TriangleMesh,
    cot_laplacian,
    normalize_mesh,
    vertex_normals,
)
from normstyle.solver import (
    SolverParams,
    energy,
    fit_rotations,
    global_step,
    local_step,
    precompute,
    solve,
    write_energy_csv,
)
from normstyle.stylefield import (
    AnalyticSphere,
    DiscreteNormalSet,
    TargetNormals,
    axis_normal_set,
    build_target_normals,
)

CUBE_AXES = axis_normal_set("cube")


def fan_mesh():
    """5-vertex open fan: one center, four rim vertices, 3 faces."""
    verts = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.1],
            [0.6, 0.9, -0.1],
            [-0.4, 1.0, 0.05],
            [-1.0, 0.2, 0.0],
        ]
    )
    faces = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 4]], dtype=np.int32)
    return TriangleMesh(verts, faces)


def brute_force_global_system(mesh, pre, R, s=None):
    """Dense Q and RHS accumulated edge by edge from the energy terms."""
    nV = mesh.n_vertices
    Q = np.zeros((nV, nV))
    b = np.zeros((nV, 3))
    folded = R if s is None else s[:, None, None] * R
    for fi, face in enumerate(mesh.faces):
        for e, (a0, a1) in enumerate(((0, 1), (1, 2), (2, 0))):
            i, j = int(face[a0]), int(face[a1])
            w = pre.weights[fi, e]
            rot_owners = face if pre.mode == "vertex" else [fi]
            for k in rot_owners:
                r = folded[int(k)] @ pre.rest_edges[fi, e]
                Q[i, i] += w
                Q[j, j] += w
                Q[i, j] -= w
                Q[j, i] -= w
                b[j] += w * r
                b[i] -= w * r
    return Q, b


def pinned_dense_solve(Q, b, pin, pin_value):
    Qp = Q.copy()
    bp = b - np.outer(Q[:, pin], pin_value)
    Qp[pin, :] = 0.0
    Qp[:, pin] = 0.0
    Qp[pin, pin] = 1.0
    bp[pin] = pin_value
    return np.linalg.solve(Qp, bp)


def ring_energy(R, E, Ed, w, lam, a, n, t):
    return float(
        (w * np.sum((E @ R.T - Ed) ** 2, axis=1)).sum()
        + lam * a * np.sum((R @ n - t) ** 2)
    )


def random_ring(rng, k=6):
    E = rng.normal(size=(k, 3))
    Ed = rng.normal(size=(k, 3))
    w = rng.uniform(0.1, 2.0, size=k)
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    t = rng.normal(size=3)
    t /= np.linalg.norm(t)
    a = rng.uniform(0.05, 1.0)
    lam = rng.uniform(0.0, 4.0)
    return E, Ed, w, n, t, a, lam


# ---------------------------------------------------------------------------
# Precompute
# ---------------------------------------------------------------------------

def test_q_nullspace_before_gauge_fix():
    for reg in ("arap", "farap"):
        m = normalize_mesh(primitives.blob(2))
        pre = precompute(m, SolverParams(regularization=reg))
        assert np.abs(pre.Q @ np.ones(m.n_vertices)).max() < 1e-9


def test_q_matches_dense_oracle_on_fan():
    m = fan_mesh()
    for reg in ("arap", "farap"):
        pre = precompute(m, SolverParams(regularization=reg))
        mcount = pre.n_elements
        I = np.broadcast_to(np.eye(3), (mcount, 3, 3)).copy()
        Qd, _ = brute_force_global_system(m, pre, I)
        assert np.abs(pre.Q.toarray() - Qd).max() < 1e-12


def test_arap_vs_farap_structurally_differ():
    m = normalize_mesh(primitives.icosahedron())
    pa = precompute(m, SolverParams(regularization="arap"))
    pf = precompute(m, SolverParams(regularization="farap"))
    assert pa.n_elements == m.n_vertices
    assert pf.n_elements == m.n_faces
    assert np.abs(pa.Q.toarray() - pf.Q.toarray()).max() > 1e-6


def test_q_proportional_to_cot_laplacian_closed():
    # spokes-and-rims assembly counts each interior edge six times
    m = normalize_mesh(primitives.icosphere(2))
    pre = precompute(m, SolverParams(regularization="arap"))
    L = cot_laplacian(m.positions, m.faces)
    assert np.abs(pre.Q.toarray() - 6.0 * L.toarray()).max() < 1e-9


def test_pinned_vertex_honored():
    m = normalize_mesh(primitives.blob(2))
    pre = precompute(m, SolverParams(pinned_vertex=7))
    assert pre.pin == 7
    with pytest.raises(ValueError):
        precompute(m, SolverParams(pinned_vertex=10**6))


# ---------------------------------------------------------------------------
# Rotation fitting
# ---------------------------------------------------------------------------

def test_exact_fit_recovers_rotation():
    rng = np.random.default_rng(0)
    Rbar = Rotation.random(8, random_state=1).as_matrix()
    for Rb in Rbar:
        E, _, w, n, _, a, lam = random_ring(rng)
        X = (E * w[:, None]).T @ (E @ Rb.T) + lam * a * np.outer(n, Rb @ n)
        got = fit_rotations(X[None])[0]
        assert np.abs(got - Rb).max() < 1e-8


def test_lambda_zero_rest_gives_identity():
    m = normalize_mesh(primitives.blob(2))
    params = SolverParams(lambda_=0.0)
    pre = precompute(m, params)
    T = build_target_normals(CUBE_AXES, pre.rest_normals, pre.mode)
    R, s = local_step(m.positions, pre, T, params)
    assert np.abs(R - np.eye(3)).max() < 1e-9


def test_local_step_beats_random_rotations():
    # integration-level Procrustes oracle on real one-rings
    m = normalize_mesh(primitives.icosphere(1))
    params = SolverParams(lambda_=1.5)
    pre = precompute(m, params)
    T = build_target_normals(CUBE_AXES, pre.rest_normals, pre.mode)
    rng = np.random.default_rng(3)
    U = m.positions + 0.1 * rng.normal(size=m.positions.shape)
    R, _ = local_step(U, pre, T, params)

    candidates = Rotation.random(20000, random_state=4).as_matrix()
    E_def = U[pre.edge_dst] - U[pre.edge_src]
    for k in range(0, m.n_vertices, 7):
        rows = np.any(m.faces == k, axis=1)
        E = pre.rest_edges[rows].reshape(-1, 3)
        Ed = E_def[rows].reshape(-1, 3)
        w = pre.weights[rows].ravel()
        args = (E, Ed, w, params.lambda_, pre.areas[k], pre.rest_normals[k], T.vectors[k])
        e_fit = ring_energy(R[k], *args)
        e_best = min(ring_energy(c, *args) for c in candidates)
        assert e_fit <= e_best + 1e-6


def test_rotations_valid_after_local_step(blob_mesh):
    params = SolverParams(lambda_=4.0)
    pre = precompute(blob_mesh, params)
    T = build_target_normals(CUBE_AXES, pre.rest_normals, pre.mode)
    rng = np.random.default_rng(5)
    U = blob_mesh.positions + 0.05 * rng.normal(size=blob_mesh.positions.shape)
    R, _ = local_step(U, pre, T, params)
    eye_err = np.abs(np.matmul(R.transpose(0, 2, 1), R) - np.eye(3)).max()
    assert eye_err < 1e-7
    assert np.abs(np.linalg.det(R) - 1.0).max() < 1e-7


def test_acap_doubled_edges_scale_two():
    m = normalize_mesh(primitives.blob(2))
    params = SolverParams(lambda_=0.0, regularization="acap")
    pre = precompute(m, params)
    T = TargetNormals("vertex", pre.rest_normals)
    R, s = local_step(2.0 * m.positions, pre, T, params)
    assert np.abs(R - np.eye(3)).max() < 1e-8
    assert np.abs(s - 2.0).max() < 1e-8


def test_acap_scale_matches_golden_section():
    from scipy.optimize import minimize_scalar

    rng = np.random.default_rng(11)
    for _ in range(30):
        E, Ed, w, n, t, a, lam = random_ring(rng)
        X = (E * w[:, None]).T @ Ed + lam * a * np.outer(n, t)
        R = fit_rotations(X[None])[0]
        num = float((w * np.einsum("kd,kd->k", Ed, E @ R.T)).sum() + lam * a * t @ (R @ n))
        den = float((w * np.einsum("kd,kd->k", E, E)).sum() + lam * a)
        s_closed = max(num / den, 1e-6)

        def acap_energy(sv):
            return (
                (w * np.sum((sv * (E @ R.T) - Ed) ** 2, axis=1)).sum()
                + lam * a * np.sum((sv * (R @ n) - t) ** 2)
            )

        res = minimize_scalar(acap_energy, method="golden", options={"xtol": 1e-12})
        assert abs(s_closed - res.x) < 1e-6


# ---------------------------------------------------------------------------
# Global step
# ---------------------------------------------------------------------------

def test_identity_rotations_recover_rest():
    for reg in ("arap", "farap"):
        m = normalize_mesh(primitives.blob(2))
        pre = precompute(m, SolverParams(regularization=reg))
        I = np.broadcast_to(np.eye(3), (pre.n_elements, 3, 3)).copy()
        U = global_step(I, pre)
        assert np.abs(U - m.positions).max() < 1e-9


def test_global_rotation_equivariance():
    m = normalize_mesh(primitives.blob(2))
    pre = precompute(m, SolverParams())
    Rbar = Rotation.from_euler("xyz", [0.3, -0.5, 1.1]).as_matrix()
    R = np.broadcast_to(Rbar, (pre.n_elements, 3, 3)).copy()
    U = global_step(R, pre)
    expected = (m.positions - pre.pin_value) @ Rbar.T + pre.pin_value
    assert np.abs(U - expected).max() < 1e-8


def test_global_step_matches_dense_least_squares():
    m = normalize_mesh(primitives.icosahedron())  # 12 vertices
    for reg in ("arap", "farap"):
        params = SolverParams(lambda_=2.0, regularization=reg)
        pre = precompute(m, params)
        T = build_target_normals(CUBE_AXES, pre.rest_normals, pre.mode)
        rng = np.random.default_rng(7)
        U0 = m.positions + 0.1 * rng.normal(size=m.positions.shape)
        R, s = local_step(U0, pre, T, params)
        U = global_step(R, pre, s)
        Qd, bd = brute_force_global_system(m, pre, R, s)
        U_dense = pinned_dense_solve(Qd, bd, pre.pin, pre.pin_value)
        assert np.abs(U - U_dense).max() < 1e-8


def test_global_step_normal_equation_residual():
    m = normalize_mesh(primitives.blob(2))
    params = SolverParams(lambda_=3.0)
    pre = precompute(m, params)
    T = build_target_normals(CUBE_AXES, pre.rest_normals, pre.mode)
    rng = np.random.default_rng(9)
    U0 = m.positions + 0.05 * rng.normal(size=m.positions.shape)
    R, s = local_step(U0, pre, T, params)
    U = global_step(R, pre, s)
    folded = R
    r_stack = folded.transpose(0, 2, 1).reshape(-1, 3)
    b = pre.K_T @ r_stack
    residual = np.abs(pre.Q @ U - b).max()
    assert residual < 1e-7
    assert residual < 1e-8 * np.abs(b).max()


# ---------------------------------------------------------------------------
# Energy
# ---------------------------------------------------------------------------

def test_energy_zero_at_rest(icosphere3):
    params = SolverParams(lambda_=4.0)
    pre = precompute(icosphere3, params)
    T = TargetNormals("vertex", pre.rest_normals)
    I = np.broadcast_to(np.eye(3), (pre.n_elements, 3, 3)).copy()
    assert abs(energy(icosphere3.positions, I, pre, T, params)) < 1e-10


def test_energy_lambda_zero_is_pure_regularizer(icosphere3):
    p0 = SolverParams(lambda_=0.0)
    p4 = SolverParams(lambda_=4.0)
    pre = precompute(icosphere3, p0)
    T = build_target_normals(CUBE_AXES, pre.rest_normals, pre.mode)
    rng = np.random.default_rng(13)
    U = icosphere3.positions + 0.02 * rng.normal(size=icosphere3.positions.shape)
    R, _ = local_step(U, pre, T, p0)
    e0 = energy(U, R, pre, T, p0)
    rn = np.einsum("mdg,mg->md", R, pre.rest_normals)
    normal_part = 4.0 * np.sum(
        pre.areas * np.sum((rn - T.vectors) ** 2, axis=1)
    )
    assert energy(U, R, pre, T, p4) == pytest.approx(e0 + normal_part, rel=1e-12)


def test_energy_linear_in_weights(icosphere3):
    params = SolverParams(lambda_=0.0)
    pre = precompute(icosphere3, params)
    T = TargetNormals("vertex", pre.rest_normals)
    rng = np.random.default_rng(17)
    U = icosphere3.positions + 0.02 * rng.normal(size=icosphere3.positions.shape)
    R, _ = local_step(U, pre, T, params)
    e1 = energy(U, R, pre, T, params)
    pre.weights = 2.0 * pre.weights
    pre.rest_edge_energy = 2.0 * pre.rest_edge_energy
    assert energy(U, R, pre, T, params) == pytest.approx(2.0 * e1, rel=1e-12)


# ---------------------------------------------------------------------------
# Full solve
# ---------------------------------------------------------------------------

def test_identity_style_is_fixed_point(blob_mesh):
    st = solve(blob_mesh, AnalyticSphere(), SolverParams(lambda_=3.0, max_iterations=50))
    assert np.abs(st.U - blob_mesh.positions).max() < 1e-6


def test_lambda_zero_is_noop(blob_mesh):
    st = solve(blob_mesh, CUBE_AXES, SolverParams(lambda_=0.0, max_iterations=50))
    assert np.abs(st.U - blob_mesh.positions).max() < 1e-6


@pytest.mark.parametrize("reg", ["arap", "farap", "acap"])
def test_constant_targets_energy_monotone(icosphere3, reg):
    st = solve(
        icosphere3,
        CUBE_AXES,
        SolverParams(lambda_=4.0, regularization=reg, max_iterations=60,
                     convergence_tol=1e-16),
    )
    h = np.array(st.energy_history)
    assert np.all(np.diff(h) <= 1e-9 * np.maximum(np.abs(h[:-1]), 1e-12))


def test_dynamic_targets_converge(icosphere3):
    st = solve(
        icosphere3,
        CUBE_AXES,
        SolverParams(lambda_=4.0, max_iterations=500, convergence_tol=1e-6,
                     dynamic_targets=True),
    )
    assert st.iteration < 500
    h = st.energy_history
    assert abs(h[-1] - h[-2]) <= 1e-6 * max(abs(h[-2]), 1e-12)


def test_rigid_motion_equivariance(blob_mesh):
    Rbar = Rotation.from_euler("xyz", [0.4, 0.9, -0.7]).as_matrix()
    t = np.array([0.3, -0.2, 0.5])
    params = SolverParams(lambda_=2.0, max_iterations=25, convergence_tol=1e-16,
                          pinned_vertex=0)
    st1 = solve(blob_mesh, CUBE_AXES, params)
    moved = blob_mesh.with_positions(blob_mesh.positions @ Rbar.T + t)
    rotated_axes = DiscreteNormalSet(CUBE_AXES.normals @ Rbar.T)
    st2 = solve(moved, rotated_axes, params)
    assert np.abs(st2.U - (st1.U @ Rbar.T + t)).max() < 1e-6


def test_rotated_normal_approximates_deformed_normal(blob_mesh):
    medians = []

    def watch(it, U, e):
        n_now = vertex_normals(np.asarray(U), blob_mesh.faces)
        medians.append((it, n_now))

    params = SolverParams(lambda_=1.0, max_iterations=40, convergence_tol=1e-10)
    st = solve(blob_mesh, CUBE_AXES, params, callback=watch)
    pre = precompute(blob_mesh, params)

    def median_angle(R, n_now):
        rn = np.einsum("mdg,mg->md", R, pre.rest_normals)
        cosang = np.clip(np.einsum("md,md->m", rn, n_now), -1, 1)
        return float(np.median(np.degrees(np.arccos(cosang))))

    first = median_angle(st.R, medians[0][1])
    last = median_angle(st.R, vertex_normals(st.U, blob_mesh.faces))
    assert np.isfinite(first) and np.isfinite(last)
    assert last < first
    assert last < 10.0


def test_callback_contract(icosphere3):
    seen = []

    def cb(it, U, e):
        assert not U.flags.writeable
        assert U.shape == icosphere3.positions.shape
        seen.append((it, float(e)))

    st = solve(icosphere3, CUBE_AXES,
               SolverParams(lambda_=4.0, max_iterations=10, convergence_tol=1e-16),
               callback=cb)
    assert [it for it, _ in seen] == list(range(1, st.iteration + 1))
    assert [e for _, e in seen] == st.energy_history[1:]


def test_energy_csv(tmp_path, icosphere3):
    st = solve(icosphere3, CUBE_AXES,
               SolverParams(lambda_=4.0, max_iterations=5, convergence_tol=1e-16))
    path = tmp_path / "hist.csv"
    write_energy_csv(st.energy_history, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,energy"
    assert len(lines) == len(st.energy_history) + 1


def test_solver_params_validation():
    with pytest.raises(ValueError):
        SolverParams(lambda_=-1.0)
    with pytest.raises(ValueError):
        SolverParams(regularization="rigid")
    with pytest.raises(ValueError):
        SolverParams(max_iterations=0)
    with pytest.raises(ValueError):
        SolverParams(convergence_tol=0.0)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_fit_rotations_always_valid(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(16, 3, 3))
    R = fit_rotations(X)
    assert np.abs(np.matmul(R.transpose(0, 2, 1), R) - np.eye(3)).max() < 1e-7
    assert np.all(np.linalg.det(R) > 0)
