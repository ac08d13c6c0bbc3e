"""Triangle-mesh representation, OBJ I/O, and discrete differential quantities.

Meshes are plain (positions, faces) arrays.  All derived quantities
(normals, areas, cotangent weights, Laplacian) are computed by free
functions so they can run on deformed position arrays without rebuilding
a mesh object.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import DegenerateError, IoError, NonManifoldError, ParseError

# cot values of near-degenerate corners are clamped to keep assembly finite
COT_CLAMP = 1e4

# face edge e runs from corner _EDGE_SRC[e] to corner _EDGE_DST[e];
# the corner opposite edge e is _EDGE_OPP[e]
_EDGE_SRC = np.array([0, 1, 2])
_EDGE_DST = np.array([1, 2, 0])
_EDGE_OPP = np.array([2, 0, 1])


@dataclass
class TriangleMesh:
    """Vertex positions (V,3) float64 and face list (F,3) int32, CCW oriented.

    ``texcoords`` and ``face_texcoords`` carry OBJ ``vt`` data through
    load/save untouched; they play no role in any computation.
    """

    positions: np.ndarray
    faces: np.ndarray
    texcoords: list[str] = field(default_factory=list)
    face_texcoords: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int32)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must be (V,3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (F,3)")

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def copy(self) -> "TriangleMesh":
        return TriangleMesh(
            self.positions.copy(),
            self.faces.copy(),
            list(self.texcoords),
            None if self.face_texcoords is None else self.face_texcoords.copy(),
        )

    def with_positions(self, positions: np.ndarray) -> "TriangleMesh":
        """Same connectivity, new vertex positions."""
        return TriangleMesh(
            np.asarray(positions, dtype=np.float64),
            self.faces,
            self.texcoords,
            self.face_texcoords,
        )


# ---------------------------------------------------------------------------
# OBJ I/O
# ---------------------------------------------------------------------------

def loads_obj(text: str) -> TriangleMesh:
    """Parse Wavefront OBJ text into a validated TriangleMesh.

    Polygon faces are fan-triangulated.  ``vt`` lines and face texture
    indices are passed through; normals and other attributes are ignored.
    Raises ParseError on malformed input and NonManifoldError if the
    result fails the manifold check.
    """
    positions: list[tuple[float, float, float]] = []
    texcoords: list[str] = []
    faces: list[tuple[int, int, int]] = []
    face_vts: list[tuple[int, int, int]] = []
    any_vt = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError(f"line {lineno}: vertex needs 3 coordinates")
            try:
                positions.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad vertex coordinate") from exc
        elif tag == "vt":
            texcoords.append(line)
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError(f"line {lineno}: face needs at least 3 vertices")
            vi: list[int] = []
            ti: list[int] = []
            for tok in parts[1:]:
                fields = tok.split("/")
                try:
                    v = int(fields[0])
                except (ValueError, IndexError) as exc:
                    raise ParseError(f"line {lineno}: bad face index {tok!r}") from exc
                v = v - 1 if v > 0 else len(positions) + v
                if not 0 <= v < len(positions):
                    raise ParseError(f"line {lineno}: face index out of range")
                vi.append(v)
                if len(fields) > 1 and fields[1]:
                    t = int(fields[1])
                    ti.append(t - 1 if t > 0 else len(texcoords) + t)
                else:
                    ti.append(-1)
            # fan triangulation
            for a in range(1, len(vi) - 1):
                tri = (vi[0], vi[a], vi[a + 1])
                if len(set(tri)) != 3:
                    raise ParseError(f"line {lineno}: degenerate face {tri}")
                faces.append(tri)
                face_vts.append((ti[0], ti[a], ti[a + 1]))
                if min(face_vts[-1]) >= 0:
                    any_vt = True

    if not positions or not faces:
        raise ParseError("OBJ contains no triangles")

    mesh = TriangleMesh(
        np.array(positions, dtype=np.float64),
        np.array(faces, dtype=np.int32),
        texcoords,
        np.array(face_vts, dtype=np.int32) if any_vt else None,
    )
    validate_mesh(mesh)
    return mesh


def load_obj(path) -> TriangleMesh:
    """Load and validate an OBJ file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path!r}: {exc}") from exc
    return loads_obj(text)


def dumps_obj(mesh: TriangleMesh) -> str:
    """Serialize to OBJ text, positions with 6 fractional digits."""
    out: list[str] = []
    for p in mesh.positions:
        out.append(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}")
    out.extend(mesh.texcoords)
    fvt = mesh.face_texcoords
    for fi, f in enumerate(mesh.faces):
        if fvt is not None and fvt[fi].min() >= 0:
            t = fvt[fi]
            out.append(
                f"f {f[0] + 1}/{t[0] + 1} {f[1] + 1}/{t[1] + 1} {f[2] + 1}/{t[2] + 1}"
            )
        else:
            out.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(out) + "\n"


def save_obj(mesh: TriangleMesh, path) -> None:
    """Write OBJ; round trip reproduces positions to 6 decimal digits."""
    if not str(path):
        raise IoError("empty output path")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps_obj(mesh))
    except OSError as exc:
        raise IoError(f"cannot write {path!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_mesh(mesh: TriangleMesh) -> None:
    """Manifold check: edges shared by <= 2 faces, consistent orientation,
    every vertex fan a single disk or half-disk, no unreferenced vertices.

    Raises NonManifoldError on violation.
    """
    V, F = mesh.n_vertices, mesh.faces
    if F.size == 0:
        raise NonManifoldError("mesh has no faces")
    if F.min() < 0 or F.max() >= V:
        raise NonManifoldError("face index out of range")
    if np.any((F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 2] == F[:, 0])):
        raise NonManifoldError("face with repeated vertex")

    referenced = np.zeros(V, dtype=bool)
    referenced[F.ravel()] = True
    if not referenced.all():
        k = int(np.flatnonzero(~referenced)[0])
        raise NonManifoldError(f"vertex {k} is not referenced by any face")

    # directed edges must be unique: duplicates mean either an edge shared
    # by >2 faces or inconsistent winding
    src = F[:, _EDGE_SRC].ravel().astype(np.int64)
    dst = F[:, _EDGE_DST].ravel().astype(np.int64)
    directed = src * V + dst
    if len(np.unique(directed)) != len(directed):
        raise NonManifoldError("duplicate directed edge (non-manifold or inconsistent winding)")

    und = np.minimum(src, dst) * V + np.maximum(src, dst)
    _, counts = np.unique(und, return_counts=True)
    if counts.max() > 2:
        raise NonManifoldError("edge shared by more than 2 faces")

    _check_vertex_fans(mesh)


def _check_vertex_fans(mesh: TriangleMesh) -> None:
    """Each vertex's incident faces must form one edge-connected fan whose
    boundary-edge count at the vertex is 0 (disk) or 2 (half-disk)."""
    edge_faces: dict[tuple[int, int], list[int]] = defaultdict(list)
    vert_faces: dict[int, list[int]] = defaultdict(list)
    for fi, (a, b, c) in enumerate(mesh.faces):
        for i, j in ((a, b), (b, c), (c, a)):
            edge_faces[(min(i, j), max(i, j))].append(fi)
        for v in (a, b, c):
            vert_faces[int(v)].append(fi)

    for v, fs in vert_faces.items():
        parent = {f: f for f in fs}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        boundary_at_v = 0
        seen: set[tuple[int, int]] = set()
        for fi in fs:
            a, b, c = mesh.faces[fi]
            for u in (a, b, c):
                u = int(u)
                if u == v:
                    continue
                key = (min(u, v), max(u, v))
                if key in seen:
                    continue
                seen.add(key)
                incident = edge_faces[key]
                if len(incident) == 1:
                    boundary_at_v += 1
                else:
                    ra, rb = find(incident[0]), find(incident[1])
                    if ra != rb:
                        parent[ra] = rb
        roots = {find(f) for f in fs}
        if len(roots) != 1:
            raise NonManifoldError(f"vertex {v}: face fan is not a single disk")
        if boundary_at_v not in (0, 2):
            raise NonManifoldError(f"vertex {v}: fan is neither a disk nor a half-disk")


# ---------------------------------------------------------------------------
# Areas, normals
# ---------------------------------------------------------------------------

def face_cross(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Unnormalized face normals (cross products), norm = 2*area."""
    p0 = positions[faces[:, 0]]
    return np.cross(positions[faces[:, 1]] - p0, positions[faces[:, 2]] - p0)


def face_areas(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    return 0.5 * np.linalg.norm(face_cross(positions, faces), axis=1)


def face_normals(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Unit face normals; raises DegenerateError on a zero-area face."""
    c = face_cross(positions, faces)
    n = np.linalg.norm(c, axis=1)
    if np.any(n < 1e-15):
        raise DegenerateError("zero-area face")
    return c / n[:, None]


def vertex_areas(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Barycentric lumped vertex areas: one third of incident face areas."""
    fa = face_areas(positions, faces)
    va = np.zeros(len(positions))
    np.add.at(va, faces.ravel(), np.repeat(fa / 3.0, 3))
    return va


def vertex_normals(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Unit vertex normals via area-weighted average of face normals.

    The area weighting uses the raw cross products (face normal times
    twice the area), so no per-face normalization is needed.
    """
    c = face_cross(positions, faces)
    acc = np.zeros_like(positions)
    np.add.at(acc, faces[:, 0], c)
    np.add.at(acc, faces[:, 1], c)
    np.add.at(acc, faces[:, 2], c)
    norms = np.linalg.norm(acc, axis=1)
    if np.any(norms < 1e-12):
        raise DegenerateError("vertex normal vanishes (incident face normals cancel)")
    return acc / norms[:, None]


def total_area(mesh: TriangleMesh) -> float:
    return float(face_areas(mesh.positions, mesh.faces).sum())


def surface_centroid(mesh: TriangleMesh) -> np.ndarray:
    """Area-weighted centroid of the surface (mean of face barycenters)."""
    fa = face_areas(mesh.positions, mesh.faces)
    bary = mesh.positions[mesh.faces].mean(axis=1)
    return (fa[:, None] * bary).sum(axis=0) / fa.sum()


def normalize_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """Translate the surface centroid to the origin and scale to unit area.

    Raises DegenerateError if the total area vanishes or any face
    degenerates below 1e-12 after rescaling.
    """
    area = total_area(mesh)
    if area < 1e-300:
        raise DegenerateError("mesh has zero total area")
    c = surface_centroid(mesh)
    out = mesh.with_positions((mesh.positions - c) / np.sqrt(area))
    if np.any(face_areas(out.positions, out.faces) <= 1e-12):
        raise DegenerateError("zero-area face after normalization")
    return out


# ---------------------------------------------------------------------------
# Cotangent weights and Laplacian
# ---------------------------------------------------------------------------

def corner_cotangents(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """(F,3) cotangent of the interior angle at each face corner, clamped."""
    p = positions[faces]  # (F,3,3)
    cots = np.empty((len(faces), 3))
    for c in range(3):
        u = p[:, (c + 1) % 3] - p[:, c]
        v = p[:, (c + 2) % 3] - p[:, c]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        dot = np.einsum("ij,ij->i", u, v)
        cots[:, c] = dot / np.maximum(cross, 1e-300)
    return np.clip(cots, -COT_CLAMP, COT_CLAMP)


def edge_topology(faces: np.ndarray):
    """Unique undirected edges and the face-edge -> edge mapping.

    Returns (edges (E,2) with i<j, face_edge_to_edge (F,3), boundary (E,) bool).
    """
    nv = int(faces.max()) + 1
    src = faces[:, _EDGE_SRC].astype(np.int64)
    dst = faces[:, _EDGE_DST].astype(np.int64)
    key = np.minimum(src, dst) * nv + np.maximum(src, dst)
    uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    edges = np.stack([uniq // nv, uniq % nv], axis=1).astype(np.int32)
    return edges, inverse.reshape(len(faces), 3), counts == 1


def cotangent_weights(positions: np.ndarray, faces: np.ndarray):
    """Cotangent edge weights w_ij = (cot a + cot b) / 2.

    Boundary edges get the one-sided half weight.  Returns
    (edges (E,2), weights (E,)).
    """
    cots = corner_cotangents(positions, faces)
    edges, fe2e, _ = edge_topology(faces)
    w = np.zeros(len(edges))
    # the corner opposite face edge e contributes to that edge's weight
    np.add.at(w, fe2e.ravel(), 0.5 * cots[:, _EDGE_OPP].ravel())
    return edges, w


def face_edge_weights(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """(F,3) full cotangent weight of the undirected edge under each face edge."""
    edges, w = cotangent_weights(positions, faces)
    _, fe2e, _ = edge_topology(faces)
    return w[fe2e]


def cot_laplacian(positions: np.ndarray, faces: np.ndarray) -> sp.csr_matrix:
    """Positive semi-definite cotangent Laplacian (diagonal positive)."""
    edges, w = cotangent_weights(positions, faces)
    i, j = edges[:, 0], edges[:, 1]
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    vals = np.concatenate([-w, -w, w, w])
    n = len(positions)
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def mass_matrix(positions: np.ndarray, faces: np.ndarray) -> sp.dia_matrix:
    """Lumped (barycentric) mass matrix: diagonal of vertex areas."""
    return sp.diags(vertex_areas(positions, faces))


# ---------------------------------------------------------------------------
# Topology queries
# ---------------------------------------------------------------------------

def boundary_vertex_mask(faces: np.ndarray, n_vertices: int) -> np.ndarray:
    edges, _, boundary = edge_topology(faces)
    mask = np.zeros(n_vertices, dtype=bool)
    mask[edges[boundary].ravel()] = True
    return mask


def is_closed(faces: np.ndarray) -> bool:
    _, _, boundary = edge_topology(faces)
    return not boundary.any()


def euler_characteristic(faces: np.ndarray, n_vertices: int) -> int:
    edges, _, _ = edge_topology(faces)
    return n_vertices - len(edges) + len(faces)


def connected_components(faces: np.ndarray, n_vertices: int) -> int:
    edges, _, _ = edge_topology(faces)
    g = sp.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])),
        shape=(n_vertices, n_vertices),
    )
    return csgraph.connected_components(g, directed=False, return_labels=False)


def angle_defects(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """2*pi minus the incident-angle sum per vertex (discrete Gaussian
    curvature; meaningful for interior vertices)."""
    p = positions[faces]
    total = np.zeros(len(positions))
    for c in range(3):
        u = p[:, (c + 1) % 3] - p[:, c]
        v = p[:, (c + 2) % 3] - p[:, c]
        cosang = np.einsum("ij,ij->i", u, v) / np.maximum(
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1), 1e-300
        )
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        np.add.at(total, faces[:, c], ang)
    return 2.0 * np.pi - total


def dihedral_angles(positions: np.ndarray, faces: np.ndarray):
    """Angle in radians between adjacent face normals, per interior edge.

    Returns (edges (Ei,2), angles (Ei,)); 0 means flat.
    """
    edges, fe2e, boundary = edge_topology(faces)
    nf = face_normals(positions, faces)
    edge_face = edge_face_map(faces)
    interior = ~boundary
    fa, fb = edge_face[interior, 0], edge_face[interior, 1]
    cosang = np.clip(np.einsum("ij,ij->i", nf[fa], nf[fb]), -1.0, 1.0)
    return edges[interior], np.arccos(cosang)


def edge_face_map(faces: np.ndarray) -> np.ndarray:
    """(E,2) faces incident to each undirected edge; -1 for boundary slot."""
    edges, fe2e, _ = edge_topology(faces)
    flat_e = fe2e.ravel()
    flat_f = np.repeat(np.arange(len(faces)), 3)
    order = np.argsort(flat_e, kind="stable")
    se, sf = flat_e[order], flat_f[order]
    first = np.searchsorted(se, np.arange(len(edges)), side="left")
    last = np.searchsorted(se, np.arange(len(edges)), side="right")
    edge_face = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_face[:, 0] = sf[first]
    two = (last - first) == 2
    edge_face[two, 1] = sf[first[two] + 1]
    return edge_face
