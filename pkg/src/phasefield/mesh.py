"""Structured simplicial meshes of intervals and axis-aligned rectangles.

Vertices and elements are stored as plain numpy arrays.  Rectangles are
triangulated cell by cell with a fixed diagonal (lower-left to upper-right)
so that repeated builds are bitwise reproducible.  Homogeneous Neumann
problems need no boundary markers, so none are kept.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh: intervals (dim=1) or triangles (dim=2).

    vertices: (n_vertices, dim) float array of coordinates.
    elements: (n_elements, dim+1) int array of vertex indices; 2D elements
        are counterclockwise.
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        e = np.ascontiguousarray(np.asarray(self.elements, dtype=np.int64))
        if self.dim not in (1, 2):
            raise ValueError(f"unsupported dimension {self.dim}")
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise ValueError("vertices must have shape (n, dim)")
        if e.ndim != 2 or e.shape[1] != self.dim + 1:
            raise ValueError("elements must have shape (m, dim+1)")
        if e.size and (e.min() < 0 or e.max() >= len(v)):
            raise ValueError("element vertex index out of range")
        v.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "elements", e)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]


def build_interval_mesh(a: float, b: float, n: int) -> Mesh:
    """Uniform partition of [a, b] into n elements (n+1 sorted vertices)."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if n < 1:
        raise ValueError(f"need at least one element, got n={n}")
    vertices = np.linspace(a, b, n + 1).reshape(-1, 1)
    idx = np.arange(n)
    elements = np.column_stack([idx, idx + 1])
    return Mesh(dim=1, vertices=vertices, elements=elements)


def build_rect_mesh(x0: float, x1: float, y0: float, y1: float,
                    nx: int, ny: int) -> Mesh:
    """Triangulate [x0,x1] x [y0,y1] on an nx-by-ny grid.

    Each grid cell is split along its lower-left to upper-right diagonal
    into two counterclockwise triangles; 2*nx*ny elements in total.
    Vertex (i, j) has index j*(nx+1) + i (x runs fastest).
    """
    if not (x0 < x1 and y0 < y1):
        raise ValueError("degenerate box")
    if nx < 1 or ny < 1:
        raise ValueError("need at least one subdivision per direction")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xg, yg = np.meshgrid(xs, ys)  # shape (ny+1, nx+1)
    vertices = np.column_stack([xg.ravel(), yg.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i = i.ravel()
    j = j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper
    return Mesh(dim=2, vertices=vertices, elements=elements)


def element_measures(mesh: Mesh) -> np.ndarray:
    """Measures (lengths or areas) of all elements; 2D areas are signed."""
    coords = mesh.vertices[mesh.elements]  # (m, dim+1, dim)
    if mesh.dim == 1:
        return coords[:, 1, 0] - coords[:, 0, 0]
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def element_basis_gradients(mesh: Mesh) -> np.ndarray:
    """Constant gradients of the barycentric (hat) basis on every element.

    Returns an array of shape (n_elements, dim+1, dim); the gradients of
    one element sum to the zero vector.
    """
    coords = mesh.vertices[mesh.elements]
    if mesh.dim == 1:
        h = (coords[:, 1, 0] - coords[:, 0, 0])[:, None]
        grads = np.empty((mesh.n_elements, 2, 1))
        grads[:, 0] = -1.0 / h
        grads[:, 1] = 1.0 / h
        return grads
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    two_area = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    grads = np.empty((mesh.n_elements, 3, 2))
    # rotate opposite edges by 90 degrees; standard P1 formula
    grads[:, 0, 0] = coords[:, 1, 1] - coords[:, 2, 1]
    grads[:, 0, 1] = coords[:, 2, 0] - coords[:, 1, 0]
    grads[:, 1, 0] = coords[:, 2, 1] - coords[:, 0, 1]
    grads[:, 1, 1] = coords[:, 0, 0] - coords[:, 2, 0]
    grads[:, 2, 0] = coords[:, 0, 1] - coords[:, 1, 1]
    grads[:, 2, 1] = coords[:, 1, 0] - coords[:, 0, 0]
    grads /= two_area[:, None, None]
    return grads


def element_geometry(mesh: Mesh, e: int) -> tuple[float, np.ndarray]:
    """Measure and barycentric basis gradients of element e."""
    if not 0 <= e < mesh.n_elements:
        raise IndexError(f"element index {e} out of range")
    coords = mesh.vertices[mesh.elements[e]]
    if mesh.dim == 1:
        h = coords[1, 0] - coords[0, 0]
        return float(h), np.array([[-1.0 / h], [1.0 / h]])
    d1 = coords[1] - coords[0]
    d2 = coords[2] - coords[0]
    two_area = d1[0] * d2[1] - d1[1] * d2[0]
    grads = np.array([
        [coords[1, 1] - coords[2, 1], coords[2, 0] - coords[1, 0]],
        [coords[2, 1] - coords[0, 1], coords[0, 0] - coords[2, 0]],
        [coords[0, 1] - coords[1, 1], coords[1, 0] - coords[0, 0]],
    ]) / two_area
    return float(0.5 * two_area), grads
