"""Procedural test and demo meshes: platonic solids, spheres, tori, grids.

All generators return consistently CCW-outward-oriented TriangleMesh
objects; closed ones have positive signed volume.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def tetrahedron() -> TriangleMesh:
    v = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
    ) / np.sqrt(3.0)
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], dtype=np.int32)
    return TriangleMesh(v, f)


def icosahedron() -> TriangleMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    v /= np.linalg.norm(v[0])
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int32,
    )
    return TriangleMesh(v, f)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    """Midpoint-subdivided icosahedron projected to the sphere.

    Vertex counts by level: 12, 42, 162, 642, 2562, 10242, ...
    """
    base = icosahedron()
    verts = [tuple(p) for p in base.positions]
    faces = base.faces.tolist()
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}
        new_faces = []

        def mid(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                p = np.array(verts[i]) + np.array(verts[j])
                p /= np.linalg.norm(p)
                midpoint[key] = len(verts)
                verts.append(tuple(p))
            return midpoint[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    v = np.array(verts, dtype=np.float64)
    v *= radius / np.linalg.norm(v, axis=1)[:, None]
    return TriangleMesh(v, np.array(faces, dtype=np.int32))


def ellipsoid(rx: float, ry: float, rz: float, subdivisions: int = 3) -> TriangleMesh:
    m = icosphere(subdivisions)
    return m.with_positions(m.positions * np.array([rx, ry, rz]))


def cube(n: int = 1, size: float = 1.0) -> TriangleMesh:
    """Axis-aligned cube of edge length ``size``, each face an n x n grid."""
    step = size / n
    half = size / 2.0
    verts: list[tuple[float, float, float]] = []
    index: dict[tuple[int, int, int], int] = {}

    def vid(i: int, j: int, k: int) -> int:
        key = (i, j, k)
        if key not in index:
            index[key] = len(verts)
            verts.append((i * step - half, j * step - half, k * step - half))
        return index[key]

    faces = []
    # each entry: fixed axis, fixed grid value, the two free axes, winding flip
    sides = [
        (0, 0, 1, 2, True), (0, n, 1, 2, False),
        (1, 0, 0, 2, False), (1, n, 0, 2, True),
        (2, 0, 0, 1, True), (2, n, 0, 1, False),
    ]
    for axis, fixed, ua, va, flip in sides:
        for u in range(n):
            for v in range(n):
                corners = []
                for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    coord = [0, 0, 0]
                    coord[axis] = fixed
                    coord[ua] = u + du
                    coord[va] = v + dv
                    corners.append(vid(*coord))
                a, b, c, d = corners
                if flip:
                    faces += [[a, c, b], [a, d, c]]
                else:
                    faces += [[a, b, c], [a, c, d]]
    return TriangleMesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int32))


def plane_grid(nx: int = 8, ny: int = 8, size: float = 1.0) -> TriangleMesh:
    """Open planar grid in the z=0 plane (normal +z), boundary included."""
    xs = np.linspace(-size / 2, size / 2, nx + 1)
    ys = np.linspace(-size / 2, size / 2, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    v = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    faces = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = (i + 1) * (ny + 1) + j
            faces += [[a, b, b + 1], [a, b + 1, a + 1]]
    return TriangleMesh(v, np.array(faces, dtype=np.int32))


def torus(n_major: int = 48, n_minor: int = 24, R: float = 1.0, r: float = 0.4) -> TriangleMesh:
    u = np.arange(n_major) * 2 * np.pi / n_major
    v = np.arange(n_minor) * 2 * np.pi / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (R + r * np.cos(vv)) * np.cos(uu)
    y = r * np.sin(vv)
    z = (R + r * np.cos(vv)) * np.sin(uu)
    verts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            a2 = i * n_minor + (j + 1) % n_minor
            b2 = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            faces += [[a, b, b2], [a, b2, a2]]
    return TriangleMesh(verts, np.array(faces, dtype=np.int32))


def uv_sphere(n_lat: int = 16, n_lon: int = 24, radius: float = 1.0) -> TriangleMesh:
    """Latitude-longitude sphere with pole fans; (n_lat-1)*n_lon + 2 vertices."""
    verts = [(0.0, radius, 0.0)]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append(
                (
                    radius * np.sin(theta) * np.cos(phi),
                    radius * np.cos(theta),
                    radius * np.sin(theta) * np.sin(phi),
                )
            )
    verts.append((0.0, -radius, 0.0))
    south = len(verts) - 1
    ring = lambda i, j: 1 + (i - 1) * n_lon + (j % n_lon)
    faces = []
    for j in range(n_lon):
        faces.append([0, ring(1, j + 1), ring(1, j)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces += [[a, b, d], [a, d, c]]
    for j in range(n_lon):
        faces.append([south, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)])
    return TriangleMesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int32))


def cylinder(n_axial: int = 12, n_circ: int = 24, radius: float = 0.5, height: float = 2.0) -> TriangleMesh:
    """Open-ended cylinder segment along y (developable, with boundary)."""
    verts = []
    for i in range(n_axial + 1):
        y = height * (i / n_axial - 0.5)
        for j in range(n_circ):
            phi = 2 * np.pi * j / n_circ
            verts.append((radius * np.cos(phi), y, radius * np.sin(phi)))
    faces = []
    for i in range(n_axial):
        for j in range(n_circ):
            a = i * n_circ + j
            b = i * n_circ + (j + 1) % n_circ
            c = (i + 1) * n_circ + j
            d = (i + 1) * n_circ + (j + 1) % n_circ
            faces += [[a, d, b], [a, c, d]]
    return TriangleMesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int32))


def _radial_bump_field(dirs: np.ndarray, seed: int, n_waves: int) -> np.ndarray:
    """Smooth deterministic pseudo-random scalar field on directions."""
    rng = np.random.default_rng(seed)
    out = np.zeros(len(dirs))
    for _ in range(n_waves):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        freq = rng.uniform(1.0, 3.0)
        phase = rng.uniform(0, 2 * np.pi)
        out += rng.uniform(0.3, 1.0) * np.sin(freq * np.pi * dirs @ axis + phase)
    return out / n_waves


def bumpy_sphere(subdivisions: int = 3, amplitude: float = 0.15, seed: int = 7) -> TriangleMesh:
    """Icosphere with smooth radial bumps; closed, genus 0."""
    m = icosphere(subdivisions)
    bump = _radial_bump_field(m.positions, seed, n_waves=5)
    return m.with_positions(m.positions * (1.0 + amplitude * bump)[:, None])


def bumpy_uv_sphere(
    n_lat: int = 23, n_lon: int = 46, amplitude: float = 0.18, seed: int = 7
) -> TriangleMesh:
    """UV sphere with smooth radial bumps (1014 vertices at the defaults)."""
    m = uv_sphere(n_lat, n_lon)
    dirs = m.positions / np.linalg.norm(m.positions, axis=1)[:, None]
    bump = _radial_bump_field(dirs, seed, n_waves=5)
    return m.with_positions(m.positions * (1.0 + amplitude * bump)[:, None])


def blob(subdivisions: int = 3, seed: int = 3) -> TriangleMesh:
    """Lumpier genus-0 shape for flow tests."""
    m = icosphere(subdivisions)
    bump = _radial_bump_field(m.positions, seed, n_waves=4)
    scale = np.array([1.3, 0.9, 1.1])
    return m.with_positions(m.positions * scale * (1.0 + 0.35 * bump)[:, None])
