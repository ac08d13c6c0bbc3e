"""Acceptance suite: one test per criterion, each printing a PASS line
with its measured numbers when the assertions hold.
"""

import json
import pathlib
import threading
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.spatial.transform import Rotation

from normstyle import primitives
from normstyle.energies import DevelopableParams, developable_flow
from normstyle.errors import GenusError
from normstyle.mesh import angle_defects, face_normals, normalize_mesh
from normstyle.solver import (
    SolverParams,
    energy,
    fit_rotations,
    global_step,
    local_step,
    precompute,
    solve,
)
from normstyle.stylefield import (
    AnalyticSphere,
    DiscreteNormalSet,
    axis_normal_set,
    build_target_normals,
    conformalized_mcf,
)

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
CUBE_AXES = axis_normal_set("cube")


def report(name, detail):
    print(f"PASS {name}: {detail}")


def assorted_meshes():
    return [
        normalize_mesh(primitives.icosphere(2)),
        normalize_mesh(primitives.cube(2)),
        normalize_mesh(primitives.plane_grid(6, 6)),
        normalize_mesh(primitives.torus(16, 10)),
        normalize_mesh(primitives.blob(2, seed=3)),
    ]


def test_constant_target_monotonicity():
    t0 = time.perf_counter()
    mesh = normalize_mesh(primitives.icosphere(3))
    assert mesh.n_vertices == 642
    worst = 0.0
    for reg in ("arap", "farap"):
        for lam in (0.5, 4.0):
            st = solve(
                mesh,
                CUBE_AXES,
                SolverParams(lambda_=lam, regularization=reg, max_iterations=100,
                             convergence_tol=1e-16),
            )
            h = np.array(st.energy_history)
            rel = np.diff(h) / np.maximum(np.abs(h[:-1]), 1e-12)
            worst = max(worst, float(rel.max()))
            assert np.all(rel <= 1e-9), f"{reg} lambda={lam}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    report("constant-T monotonicity",
           f"worst relative increase {worst:.2e}, {elapsed:.2f}s")


def test_identity_analogy():
    t0 = time.perf_counter()
    worst = 0.0
    for mesh in assorted_meshes():
        st = solve(mesh, AnalyticSphere(),
                   SolverParams(lambda_=2.0, max_iterations=50, convergence_tol=1e-10))
        worst = max(worst, float(np.abs(st.U - mesh.positions).max()))
    elapsed = time.perf_counter() - t0
    assert worst < 1e-5
    assert elapsed < 10.0
    report("identity analogy", f"max displacement {worst:.2e} on 5 meshes, {elapsed:.2f}s")


def test_lambda_zero_noop():
    worst = 0.0
    for mesh in assorted_meshes():
        st = solve(mesh, CUBE_AXES,
                   SolverParams(lambda_=0.0, max_iterations=50, convergence_tol=1e-10))
        worst = max(worst, float(np.abs(st.U - mesh.positions).max()))
    assert worst < 1e-6
    report("lambda=0 no-op", f"max displacement {worst:.2e}")


def test_normal_deviation_reduction():
    t0 = time.perf_counter()
    mesh = normalize_mesh(primitives.icosphere(3))

    def mean_dev(P):
        nf = face_normals(P, mesh.faces)
        best = (nf @ CUBE_AXES.normals.T).max(axis=1)
        return float(np.degrees(np.arccos(np.clip(best, -1, 1))).mean())

    st = solve(mesh, CUBE_AXES,
               SolverParams(lambda_=4.0, max_iterations=100, convergence_tol=1e-16))
    before, after = mean_dev(mesh.positions), mean_dev(st.U)
    elapsed = time.perf_counter() - t0
    assert after <= 0.5 * before
    assert after < 15.0
    assert elapsed < 5.0
    report("normal-deviation reduction",
           f"{before:.2f} deg -> {after:.2f} deg ({100 * (1 - after / before):.0f}% cut), "
           f"{elapsed:.2f}s")


def test_local_step_random_rotation_oracle():
    rng = np.random.default_rng(42)
    candidates = Rotation.random(100_000, random_state=7).as_matrix()
    worst_gap = -np.inf
    for _ in range(100):
        k = rng.integers(4, 9)
        E = rng.normal(size=(k, 3))
        Ed = rng.normal(size=(k, 3))
        w = rng.uniform(0.05, 2.0, size=k)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        t = rng.normal(size=3)
        t /= np.linalg.norm(t)
        lam, a = rng.uniform(0.0, 5.0), rng.uniform(0.01, 1.0)
        X = (E * w[:, None]).T @ Ed + lam * a * np.outer(n, t)
        R = fit_rotations(X[None])[0]

        def ring_energy(Rc):
            return (w * np.sum((E @ Rc.swapaxes(-1, -2) - Ed) ** 2, axis=-1)).sum(
                axis=-1
            ) + lam * a * np.sum((Rc @ n - t) ** 2, axis=-1)

        e_fit = float(ring_energy(R[None])[0])
        e_mc = float(ring_energy(candidates).min())
        worst_gap = max(worst_gap, e_fit - e_mc)
        assert e_fit <= e_mc + 1e-6
    report("local-step Procrustes oracle",
           f"100 rings vs 1e5 rotations, worst gap {worst_gap:.2e}")


def test_global_step_dense_oracle():
    mesh = normalize_mesh(primitives.icosahedron())
    assert mesh.n_vertices == 12
    params = SolverParams(lambda_=2.0)
    pre = precompute(mesh, params)
    T = build_target_normals(CUBE_AXES, pre.rest_normals, pre.mode)
    rng = np.random.default_rng(3)
    U0 = mesh.positions + 0.1 * rng.normal(size=mesh.positions.shape)
    R, s = local_step(U0, pre, T, params)
    U = global_step(R, pre, s)

    nV = mesh.n_vertices
    Qd = np.zeros((nV, nV))
    bd = np.zeros((nV, 3))
    for fi, face in enumerate(mesh.faces):
        for e, (a0, a1) in enumerate(((0, 1), (1, 2), (2, 0))):
            i, j = int(face[a0]), int(face[a1])
            w = pre.weights[fi, e]
            for kv in face:
                r = R[int(kv)] @ pre.rest_edges[fi, e]
                Qd[i, i] += w
                Qd[j, j] += w
                Qd[i, j] -= w
                Qd[j, i] -= w
                bd[j] += w * r
                bd[i] -= w * r
    Qp = Qd.copy()
    bp = bd - np.outer(Qd[:, pre.pin], pre.pin_value)
    Qp[pre.pin, :] = 0.0
    Qp[:, pre.pin] = 0.0
    Qp[pre.pin, pre.pin] = 1.0
    bp[pre.pin] = pre.pin_value
    U_dense = np.linalg.solve(Qp, bp)
    err = float(np.abs(U - U_dense).max())
    assert err < 1e-8
    report("global-step dense oracle", f"12-vertex max coordinate error {err:.2e}")


def test_acap_scale_oracle():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        k = rng.integers(4, 9)
        E = rng.normal(size=(k, 3))
        Ed = rng.normal(size=(k, 3))
        w = rng.uniform(0.05, 2.0, size=k)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        t = rng.normal(size=3)
        t /= np.linalg.norm(t)
        lam, a = rng.uniform(0.0, 5.0), rng.uniform(0.01, 1.0)
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
        worst = max(worst, abs(s_closed - res.x))
        assert abs(s_closed - res.x) < 1e-6
    report("ACAP scale oracle", f"100 instances, worst |closed - search| {worst:.2e}")


def test_mcf_sphericity_and_genus_guard():
    blob = primitives.blob(3, seed=3)
    assert blob.n_vertices <= 2000
    t0 = time.perf_counter()
    param = conformalized_mcf(blob)  # raises NonConvergenceError on failure
    elapsed = time.perf_counter() - t0
    r = np.linalg.norm(param.sphere_positions, axis=1)
    assert np.abs(r - 1).max() < 1e-6
    with pytest.raises(GenusError):
        conformalized_mcf(primitives.torus(12, 8))
    report("MCF sphericity", f"{blob.n_vertices}-vertex blob flowed in {elapsed:.2f}s; "
           "torus raises GenusError")


def test_developable_flow_concentration():
    t0 = time.perf_counter()
    mesh = normalize_mesh(primitives.bumpy_uv_sphere())
    st = developable_flow(
        mesh,
        DevelopableParams(crease_threshold=0.01),
        SolverParams(lambda_=10.0, regularization="farap", max_iterations=500,
                     convergence_tol=1e-7),
    )
    elapsed = time.perf_counter() - t0
    d_in = np.abs(angle_defects(mesh.positions, mesh.faces))
    d_out = np.abs(angle_defects(st.U, mesh.faces))
    flat_in, flat_out = (d_in < 1e-3).mean(), (d_out < 1e-3).mean()
    k = int(np.ceil(0.05 * len(d_in)))
    top_in, top_out = np.sort(d_in)[-k:].sum(), np.sort(d_out)[-k:].sum()
    assert flat_out > flat_in
    assert top_out > top_in
    assert elapsed < 30.0
    report(
        "developable flow",
        f"{mesh.n_vertices} verts: flat fraction {flat_in:.3f}->{flat_out:.3f}, "
        f"top-5% |defect| {top_in:.2f}->{top_out:.2f}, {elapsed:.1f}s",
    )


def test_performance_floor():
    mesh = normalize_mesh(primitives.torus(160, 125))
    assert mesh.n_vertices == 20000
    params = SolverParams(lambda_=1.0)
    pre = precompute(mesh, params)
    T = build_target_normals(CUBE_AXES, pre.rest_normals, pre.mode)
    U = mesh.positions.copy()
    R = None
    # warm-up iteration excluded from timing
    R, s = local_step(U, pre, T, params, prev_R=R)
    U = global_step(R, pre, s)
    n_iter = 12
    t0 = time.perf_counter()
    for _ in range(n_iter):
        R, s = local_step(U, pre, T, params, prev_R=R)
        U = global_step(R, pre, s)
        energy(U, R, pre, T, params, s)
    rate = n_iter / (time.perf_counter() - t0)
    assert rate >= 5.0
    report("performance floor", f"{rate:.1f} iterations/s on 20k vertices")


def test_rigid_motion_equivariance():
    mesh = normalize_mesh(primitives.blob(3, seed=3))
    Rbar = Rotation.from_euler("xyz", [0.4, 0.9, -0.7]).as_matrix()
    t = np.array([0.3, -0.2, 0.5])
    moved = mesh.with_positions(mesh.positions @ Rbar.T + t)
    rotated_axes = DiscreteNormalSet(CUBE_AXES.normals @ Rbar.T)
    worst = 0.0
    for reg in ("arap", "farap", "acap"):
        params = SolverParams(lambda_=2.0, regularization=reg, max_iterations=25,
                              convergence_tol=1e-16, pinned_vertex=0)
        st1 = solve(mesh, CUBE_AXES, params)
        st2 = solve(moved, rotated_axes, params)
        err = float(np.abs(st2.U - (st1.U @ Rbar.T + t)).max())
        worst = max(worst, err)
        assert err < 1e-6, reg
    report("rigid-motion equivariance", f"max deviation {worst:.2e} over 3 regularizers")


def test_secondary_protocol_conformance():
    from websockets.sync.client import connect

    from normstyle.studio import decode_frame, encode_frame, make_server

    manifest = json.loads((FIXTURES / "studio_transcript.json").read_text())
    server = make_server("127.0.0.1", 0)
    port = server.socket.getsockname()[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    frames_checked = 0
    try:
        with connect(f"ws://127.0.0.1:{port}", max_size=None) as ws:
            for step in manifest:
                if step["dir"] == "send":
                    ws.send(step["text"])
                elif step["dir"] == "recv":
                    assert ws.recv(timeout=30) == step["text"]
                else:
                    msg = ws.recv(timeout=30)
                    raw = (FIXTURES / step["file"]).read_bytes()
                    assert msg == raw
                    it, e, P = decode_frame(raw)
                    assert encode_frame(it, e, P) == raw
                    frames_checked += 1
    finally:
        server.shutdown()
    report("protocol conformance (secondary)",
           f"transcript of {len(manifest)} steps replayed identically; "
           f"{frames_checked} binary frames round-tripped bit-exactly")
