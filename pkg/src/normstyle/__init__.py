"""Normal-driven mesh stylization.

Deforms a triangle mesh so its surface normals match targets looked up
from a style field (primitive normal sets, sphere-mapped style meshes,
painted normal-capture images, or energies such as developability),
balanced against an ARAP-family regularizer.
"""

from . import energies, mesh, primitives, solver, stylefield
from .errors import (
    DecodeError,
    DegenerateError,
    FactorizationError,
    GenusError,
    IoError,
    NonConvergenceError,
    NonFiniteError,
    NonManifoldError,
    NormStyleError,
    ParseError,
    SolveError,
    SpanError,
)
from .mesh import TriangleMesh, load_obj, normalize_mesh, save_obj
from .solver import SolverParams, SolverState, solve
from .stylefield import (
    AnalyticSphere,
    DiscreteNormalSet,
    NormalCaptureImage,
    SphericalParam,
    TargetNormals,
    axis_normal_set,
    build_target_normals,
    conformalized_mcf,
)

__all__ = [
    "TriangleMesh",
    "load_obj",
    "save_obj",
    "normalize_mesh",
    "SolverParams",
    "SolverState",
    "solve",
    "AnalyticSphere",
    "DiscreteNormalSet",
    "SphericalParam",
    "NormalCaptureImage",
    "TargetNormals",
    "axis_normal_set",
    "build_target_normals",
    "conformalized_mcf",
    "mesh",
    "primitives",
    "solver",
    "stylefield",
    "energies",
    "NormStyleError",
    "ParseError",
    "NonManifoldError",
    "DegenerateError",
    "IoError",
    "GenusError",
    "NonConvergenceError",
    "DecodeError",
    "SpanError",
    "FactorizationError",
    "SolveError",
    "NonFiniteError",
]
