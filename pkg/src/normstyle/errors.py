"""Exception hierarchy shared across the package."""


class NormStyleError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(NormStyleError):
    """Malformed OBJ (bad syntax, out-of-range or degenerate face indices)."""


class NonManifoldError(NormStyleError):
    """Mesh fails the edge- or vertex-manifold check."""


class DegenerateError(NormStyleError):
    """Geometry too degenerate to process (zero area, vanishing normal)."""


class IoError(NormStyleError):
    """File could not be read or written."""


class GenusError(NormStyleError):
    """Mesh is not a closed, connected, genus-0 surface."""


class NonConvergenceError(NormStyleError):
    """Iterative procedure exhausted its iteration budget."""


class DecodeError(NormStyleError):
    """Normal-capture pixel decodes to a near-zero vector."""


class SpanError(NormStyleError):
    """Direction set does not span 3D."""


class FactorizationError(NormStyleError):
    """Global system matrix could not be factorized."""


class SolveError(NormStyleError):
    """Back-substitution of the global system failed."""


class NonFiniteError(NormStyleError):
    """Solver state left the finite-float domain."""
