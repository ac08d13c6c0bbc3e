import numpy as np
import pytest

from normstyle import primitives
from normstyle.mesh import TriangleMesh, normalize_mesh


@pytest.fixture(scope="session")
def icosphere3():
    return normalize_mesh(primitives.icosphere(3))


@pytest.fixture(scope="session")
def blob_mesh():
    return normalize_mesh(primitives.blob(3, seed=3))


@pytest.fixture()
def single_triangle():
    return TriangleMesh(
        np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3) / 2, 0.0]]),
        np.array([[0, 1, 2]]),
    )


def hinge_mesh(angle_deg: float = 90.0, strips: int = 3):
    """Two rectangular strips meeting along the y axis at the given dihedral."""
    half = np.radians(angle_deg) / 2.0
    da = np.array([np.cos(half), 0.0, np.sin(half)])
    db = np.array([-np.cos(half), 0.0, np.sin(half)])
    crease = [np.array([0.0, float(j), 0.0]) for j in range(strips + 1)]
    wing_a = [c + da for c in crease]
    wing_b = [c + db for c in crease]
    verts = crease + wing_a + wing_b
    n = strips + 1
    faces = []
    for j in range(strips):
        c0, c1 = j, j + 1
        a0, a1 = n + j, n + j + 1
        b0, b1 = 2 * n + j, 2 * n + j + 1
        faces += [[c0, a0, a1], [c0, a1, c1]]
        faces += [[c0, c1, b1], [c0, b1, b0]]
    return TriangleMesh(np.array(verts, dtype=float), np.array(faces, dtype=np.int32))
