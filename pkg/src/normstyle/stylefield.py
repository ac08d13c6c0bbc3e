"""Style fields: maps from unit directions to target unit normals.

A style field answers one query: given the unit normal of a surface
element, what should that normal become?  Four realizations:

* ``AnalyticSphere``     -- identity (the input is its own style),
* ``DiscreteNormalSet``  -- snap to the nearest of a finite normal set,
* ``SphericalParam``     -- a style mesh flowed to a sphere; lookups locate
                            the spherical triangle containing the query
                            direction and return that face's original normal,
* ``NormalCaptureImage`` -- user-painted equirectangular RGB image decoded
                            to normals.

Targets are produced by evaluating the field at the mesh's own element
normals (the Gauss-map correspondence).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .errors import DecodeError, GenusError, NonConvergenceError, SpanError
from .mesh import (
    TriangleMesh,
    connected_components,
    cot_laplacian,
    euler_characteristic,
    face_areas,
    face_normals,
    is_closed,
    normalize_mesh,
    vertex_areas,
)

# ambiguity tolerance for the spherical point-in-triangle test; hits with
# any |det| below this fall back to the nearest-centroid face
_TRIPLE_EPS = 1e-12


@dataclass
class TargetNormals:
    """Per-element unit target vectors; mode is 'vertex' or 'face'."""

    mode: str
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.mode not in ("vertex", "face"):
            raise ValueError(f"bad mode {self.mode!r}")


def _as_unit_rows(d: np.ndarray) -> tuple[np.ndarray, bool]:
    d = np.asarray(d, dtype=np.float64)
    single = d.ndim == 1
    return (d[None, :] if single else d), single


# ---------------------------------------------------------------------------
# Identity and discrete-set styles
# ---------------------------------------------------------------------------

class AnalyticSphere:
    """Identity style: every direction is its own target."""

    def lookup(self, d: np.ndarray) -> np.ndarray:
        arr, single = _as_unit_rows(d)
        out = arr.copy()
        return out[0] if single else out


@dataclass
class DiscreteNormalSet:
    """Finite set of unit target normals (convex primitives, axis sets)."""

    normals: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normals, dtype=np.float64)
        if n.ndim != 2 or n.shape[1] != 3 or len(n) == 0:
            raise ValueError("normals must be a nonempty (N,3) array")
        lens = np.linalg.norm(n, axis=1)
        if np.any(lens < 1e-12):
            raise ValueError("zero-length normal in set")
        self.normals = n / lens[:, None]

    def lookup(self, d: np.ndarray) -> np.ndarray:
        arr, single = _as_unit_rows(d)
        # argmax returns the lowest index on ties
        idx = np.argmax(arr @ self.normals.T, axis=1)
        out = self.normals[idx]
        return out[0] if single else out


def snap_closest_normal(style: DiscreteNormalSet, d: np.ndarray) -> np.ndarray:
    """Nearest normal of the set by dot product; ties break to lowest index."""
    return style.lookup(d)


def axis_normal_set(spec) -> DiscreteNormalSet:
    """Normal set from 'cube' or an explicit direction list.

    Raises SpanError if the directions do not span 3D.
    """
    if isinstance(spec, str):
        if spec != "cube":
            raise ValueError(f"unknown axis set {spec!r}")
        dirs = np.array(
            [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
            dtype=np.float64,
        )
    else:
        dirs = np.asarray(spec, dtype=np.float64)
        if dirs.ndim != 2 or dirs.shape[1] != 3 or len(dirs) < 4:
            raise SpanError("polytope spec needs at least 4 directions")
    if np.linalg.matrix_rank(dirs, tol=1e-9) < 3:
        raise SpanError("directions do not span 3D")
    return DiscreteNormalSet(dirs)


def primitive_normal_set(name: str) -> DiscreteNormalSet:
    """Face-normal set of a named convex primitive."""
    from . import primitives

    if name == "cube":
        return axis_normal_set("cube")
    if name == "icosahedron":
        m = primitives.icosahedron()
    elif name == "tetrahedron":
        m = primitives.tetrahedron()
    else:
        raise ValueError(f"unknown primitive {name!r}")
    return DiscreteNormalSet(face_normals(m.positions, m.faces))


# ---------------------------------------------------------------------------
# Spherical parameterization of a style mesh
# ---------------------------------------------------------------------------

@dataclass
class McfParams:
    """Conformalized mean-curvature-flow settings (after unit-area scaling)."""

    step: float = 1e-2
    max_iterations: int = 500
    sphericity_tol: float = 0.01


@dataclass
class SphericalParam:
    """Style mesh plus its per-vertex positions flowed onto the unit sphere."""

    style: TriangleMesh
    sphere_positions: np.ndarray
    _normals: np.ndarray = field(init=False, repr=False)
    _tree: cKDTree = field(init=False, repr=False)
    _centroid_dirs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.sphere_positions = np.asarray(self.sphere_positions, dtype=np.float64)
        if self.sphere_positions.shape != self.style.positions.shape:
            raise ValueError("sphere positions must match style mesh vertices")
        self._normals = face_normals(self.style.positions, self.style.faces)
        cen = self.sphere_positions[self.style.faces].mean(axis=1)
        self._centroid_dirs = cen / np.linalg.norm(cen, axis=1)[:, None]
        self._tree = cKDTree(self._centroid_dirs)

    def lookup(self, d: np.ndarray) -> np.ndarray:
        arr, single = _as_unit_rows(d)
        out = self._normals[locate_spherical_faces(self, arr)]
        return out[0] if single else out


def conformalized_mcf(style: TriangleMesh, params: McfParams | None = None) -> SphericalParam:
    """Flow a closed genus-0 style mesh onto the unit sphere.

    Implicit steps (M_t + step * L0) V' = M_t V with L0 the cotangent
    Laplacian of the original mesh, recentering to the area-weighted
    centroid and rescaling to mean radius 1 after every step, until
    stddev(|v|) / mean(|v|) falls below the sphericity tolerance.

    Raises GenusError for open, non-genus-0, or multi-component input and
    NonConvergenceError when the iteration budget runs out.
    """
    params = params or McfParams()
    F = style.faces
    nv = style.n_vertices
    if not is_closed(F):
        raise GenusError("style mesh has boundary")
    if connected_components(F, nv) != 1:
        raise GenusError("style mesh has multiple connected components")
    if euler_characteristic(F, nv) != 2:
        raise GenusError("style mesh is not genus 0")

    normalized = normalize_mesh(style)
    V = normalized.positions.copy()
    L0 = cot_laplacian(V, F).tocsc()

    def recenter_rescale(U):
        fa = face_areas(U, F)
        centroid = (fa[:, None] * U[F].mean(axis=1)).sum(axis=0) / fa.sum()
        U = U - centroid
        radii = np.linalg.norm(U, axis=1)
        return U / radii.mean()

    U = recenter_rescale(V)
    for _ in range(params.max_iterations):
        radii = np.linalg.norm(U, axis=1)
        if radii.std() / radii.mean() < params.sphericity_tol:
            return SphericalParam(style, U / radii[:, None])
        M = sp.diags(vertex_areas(U, F)).tocsc()
        A = (M + params.step * L0).tocsc()
        U = spla.spsolve(A, M @ U)
        if not np.all(np.isfinite(U)):
            raise NonConvergenceError("flow produced non-finite positions")
        U = recenter_rescale(U)
    raise NonConvergenceError(
        f"sphericity {radii.std() / radii.mean():.4f} not below "
        f"{params.sphericity_tol} after {params.max_iterations} iterations"
    )


def locate_spherical_faces(param: SphericalParam, dirs: np.ndarray) -> np.ndarray:
    """Face index of the spherical triangle containing each direction.

    Candidate faces come from a KD-tree over sphere-mapped face centroid
    directions; a candidate contains the query when all three scalar
    triple products with its (CCW) sphere vertices are positive.
    Ambiguous or missed queries fall back to the nearest centroid.
    """
    F = param.style.faces
    S = param.sphere_positions
    k = min(32, len(F))
    _, cand = param._tree.query(dirs, k=k)
    if k == 1:
        cand = cand[:, None]
    a = S[F[cand, 0]]  # (N,k,3)
    b = S[F[cand, 1]]
    c = S[F[cand, 2]]
    d = dirs[:, None, :]
    det_ab = np.einsum("nki,nki->nk", np.cross(a, b), d)
    det_bc = np.einsum("nki,nki->nk", np.cross(b, c), d)
    det_ca = np.einsum("nki,nki->nk", np.cross(c, a), d)
    inside = (det_ab > _TRIPLE_EPS) & (det_bc > _TRIPLE_EPS) & (det_ca > _TRIPLE_EPS)
    first = np.argmax(inside, axis=1)
    hit = inside[np.arange(len(dirs)), first]
    result = cand[np.arange(len(dirs)), first]
    result[~hit] = cand[~hit, 0]  # nearest centroid fallback
    return result


def lookup_spherical(param: SphericalParam, d: np.ndarray) -> np.ndarray:
    """Original face normal of the spherical triangle containing ``d``."""
    return param.lookup(d)


# ---------------------------------------------------------------------------
# Normal-capture images (equirectangular)
# ---------------------------------------------------------------------------

@dataclass
class NormalCaptureImage:
    """Equirectangular RGB image encoding target normals.

    Pixel centers sample longitude = atan2(z, x) across columns and
    latitude = asin(y) down rows (row 0 = north pole).  A normal n maps
    to RGB as round(255 * (n + 1) / 2).
    """

    rgb: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.rgb)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
            raise ValueError("rgb must be a nonempty (H,W,3) array")
        self.rgb = arr.astype(np.float64)

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    def lookup(self, d: np.ndarray) -> np.ndarray:
        arr, single = _as_unit_rows(d)
        out = lookup_normcap(self, arr)
        return out[0] if single else out


def decode_normcap(image) -> NormalCaptureImage:
    """Build a NormalCaptureImage from a (H,W,3) uint8 array or PIL image."""
    if hasattr(image, "convert"):  # PIL image
        image = np.asarray(image.convert("RGB"))
    return NormalCaptureImage(np.asarray(image, dtype=np.float64))


def lookup_normcap(img: NormalCaptureImage, dirs: np.ndarray) -> np.ndarray:
    """Bilinear RGB sample at each direction, decoded to a unit normal.

    Raises DecodeError when a sampled pixel decodes below norm 0.1.
    """
    h, w = img.height, img.width
    lon = np.arctan2(dirs[:, 2], dirs[:, 0])
    lat = np.arcsin(np.clip(dirs[:, 1], -1.0, 1.0))
    col = (lon + np.pi) / (2 * np.pi) * w - 0.5
    row = (0.5 - lat / np.pi) * h - 0.5

    c0 = np.floor(col).astype(np.int64)
    r0 = np.floor(row).astype(np.int64)
    fc = col - c0
    fr = row - r0
    r0c = np.clip(r0, 0, h - 1)
    r1c = np.clip(r0 + 1, 0, h - 1)
    c0w = np.mod(c0, w)  # longitude wraps
    c1w = np.mod(c0 + 1, w)

    p = img.rgb
    rgb = (
        p[r0c, c0w] * ((1 - fr) * (1 - fc))[:, None]
        + p[r0c, c1w] * ((1 - fr) * fc)[:, None]
        + p[r1c, c0w] * (fr * (1 - fc))[:, None]
        + p[r1c, c1w] * (fr * fc)[:, None]
    )
    n = 2.0 * rgb / 255.0 - 1.0
    lens = np.linalg.norm(n, axis=1)
    if np.any(lens < 0.1):
        raise DecodeError("normal-capture pixel decodes to a near-zero vector")
    return n / lens[:, None]


def encode_normcap(normals_fn, width: int = 256, height: int = 128) -> np.ndarray:
    """Rasterize a direction->normal function into equirectangular uint8 RGB.

    Inverse of the decode convention; used to synthesize capture images.
    """
    cols = (np.arange(width) + 0.5) / width * 2 * np.pi - np.pi
    rows = np.pi / 2 - (np.arange(height) + 0.5) / height * np.pi
    lon, lat = np.meshgrid(cols, rows)
    d = np.stack(
        [np.cos(lat) * np.cos(lon), np.sin(lat), np.cos(lat) * np.sin(lon)], axis=-1
    )
    n = normals_fn(d.reshape(-1, 3)).reshape(height, width, 3)
    return np.clip(np.round((n + 1.0) / 2.0 * 255.0), 0, 255).astype(np.uint8)


StyleField = Union[AnalyticSphere, DiscreteNormalSet, SphericalParam, NormalCaptureImage]


def build_target_normals(style: StyleField, normals: np.ndarray, mode: str) -> TargetNormals:
    """Paste the style field onto a mesh via its element normals.

    ``normals`` are the current per-vertex or per-face unit normals; the
    target for element k is the style lookup of normal k.  Lookups return
    unit vectors, so the identity style reproduces the input exactly.
    """
    return TargetNormals(mode, style.lookup(np.asarray(normals, dtype=np.float64)))
