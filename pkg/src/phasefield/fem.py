"""P1 finite element assembly: stiffness, weighted mass, secant load.

All operators act on nodal fields, i.e. plain 1D numpy arrays with one
coefficient per mesh vertex.  Matrices are assembled element-wise into
scipy CSR form; load vectors are accumulated with bincount so results do
not depend on element order beyond rounding.

Quadrature rules are stored in barycentric coordinates with weights
summing to one, so an integral over an element is just
measure * sum(w_q * f(x_q)).  The default degree 4 integrates the
quartic double-well energy density and the secant-quotient load exactly
for P1 fields; higher degrees are available for cross-checks.
"""

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, element_basis_gradients, element_measures
from .model import ModelParams, PotentialSpec, potential_value, secant_slope

NodalField = np.ndarray
SparseMatrix = sp.csr_array

# degree-4 symmetric 6-point triangle rule (two orbits)
_TRI6_A = 0.445948490915965
_TRI6_B = 0.091576213509771
_TRI6_WA = 0.223381589678011
_TRI6_WB = 0.109951743655322


@lru_cache(maxsize=None)
def interval_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on the reference interval, barycentric, weights sum 1."""
    n = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    bary = np.column_stack([1.0 - t, t])
    return bary, 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric or collapsed-tensor rule on the reference triangle.

    Returns barycentric points (q, 3) and weights summing to one.
    Degree <= 4 uses the classical 6-point rule; higher degrees fall
    back to a Duffy-transformed tensor Gauss rule.
    """
    if degree <= 4:
        pts = []
        wts = []
        for a, w in ((_TRI6_A, _TRI6_WA), (_TRI6_B, _TRI6_WB)):
            c = 1.0 - 2.0 * a
            pts += [(c, a, a), (a, c, a), (a, a, c)]
            wts += [w, w, w]
        return np.array(pts), np.array(wts)
    n = (degree + 2) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    # collapse the unit square onto the triangle: (u, v) -> (u, v(1-u))
    uu, vv = np.meshgrid(u, u)
    ww = np.outer(wu, wu) * (1.0 - uu)
    l1 = uu.ravel()
    l2 = (vv * (1.0 - uu)).ravel()
    bary = np.column_stack([1.0 - l1 - l2, l1, l2])
    return bary, 2.0 * ww.ravel()


def quadrature_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    return interval_rule(degree) if dim == 1 else triangle_rule(degree)


def _check_field(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise ValueError(
            f"field has {values.shape} entries, mesh has {mesh.n_vertices} vertices")
    return values


def _scatter_matrix(mesh: Mesh, local: np.ndarray) -> SparseMatrix:
    """Sum (m, k, k) element blocks into a global CSR matrix."""
    conn = mesh.elements
    k = conn.shape[1]
    rows = np.repeat(conn, k, axis=1).ravel()
    cols = np.tile(conn, (1, k)).ravel()
    n = mesh.n_vertices
    mat = sp.coo_array((local.ravel(), (rows, cols)), shape=(n, n))
    return mat.tocsr()


def assemble_stiffness(mesh: Mesh) -> SparseMatrix:
    """Global stiffness matrix, entries integral of grad(phi_i).grad(phi_j).

    Symmetric positive semidefinite with constants in its kernel.
    """
    grads = element_basis_gradients(mesh)
    measures = element_measures(mesh)
    local = np.einsum("e,eid,ejd->eij", measures, grads, grads)
    return _scatter_matrix(mesh, local)


def assemble_weighted_mass(mesh: Mesh, weights: np.ndarray) -> SparseMatrix:
    """Mass matrix with one constant positive weight per element."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (mesh.n_elements,):
        raise ValueError("need one weight per element")
    if np.any(weights <= 0):
        raise ValueError("element weights must be positive")
    measures = element_measures(mesh)
    k = mesh.dim + 1
    template = (1.0 + np.eye(k)) / (k * (k + 1))
    local = (weights * measures)[:, None, None] * template
    return _scatter_matrix(mesh, local)


def assemble_mass(mesh: Mesh) -> SparseMatrix:
    """Unweighted consistent mass matrix."""
    return assemble_weighted_mass(mesh, np.ones(mesh.n_elements))


def element_gradient(mesh: Mesh, values: NodalField, e: int) -> np.ndarray:
    """Constant gradient of the P1 interpolant on element e."""
    values = _check_field(mesh, values)
    grads = element_basis_gradients(mesh)
    return values[mesh.elements[e]] @ grads[e]


def element_gradients(mesh: Mesh, values: NodalField) -> np.ndarray:
    """Per-element constant gradients, shape (n_elements, dim)."""
    values = _check_field(mesh, values)
    grads = element_basis_gradients(mesh)
    return np.einsum("ek,ekd->ed", values[mesh.elements], grads)


def assemble_secant_load(mesh: Mesh, values: NodalField, values_prev: NodalField,
                         p: PotentialSpec, quad_degree: int = 4) -> np.ndarray:
    """Load vector with entries integral of D(S, S_prev) phi_i.

    D is the closed-form secant quotient of the potential; the integrand
    is a quartic per element, so the default rule is exact.
    """
    if quad_degree < 4:
        raise ValueError("quadrature degree must be at least 4")
    values = _check_field(mesh, values)
    values_prev = _check_field(mesh, values_prev)
    bary, w = quadrature_rule(mesh.dim, quad_degree)
    conn = mesh.elements
    s = values[conn] @ bary.T          # (m, q)
    s_prev = values_prev[conn] @ bary.T
    d_q = secant_slope(p, s, s_prev)
    measures = element_measures(mesh)
    local = measures[:, None] * ((d_q * w) @ bary)
    return np.bincount(conn.ravel(), weights=local.ravel(),
                       minlength=mesh.n_vertices)


def energy(mesh: Mesh, values: NodalField, params: ModelParams,
           quad_degree: int = 4) -> float:
    """Free energy (alpha/2)|grad S|^2 + beta d(S) integrated over the mesh.

    The gradient term is exact for P1; the potential term uses the given
    quadrature degree (>= 4 is exact for the double well).
    """
    if quad_degree < 4:
        raise ValueError("quadrature degree must be at least 4")
    values = _check_field(mesh, values)
    measures = element_measures(mesh)
    grads = element_gradients(mesh, values)
    grad_term = 0.5 * params.alpha * float(
        measures @ np.sum(grads * grads, axis=1))
    bary, w = quadrature_rule(mesh.dim, quad_degree)
    s = values[mesh.elements] @ bary.T
    pot_term = params.beta * float(measures @ (potential_value(params.potential, s) @ w))
    return grad_term + pot_term


def l2_norm(mesh: Mesh, values: NodalField) -> float:
    """L2 norm of the P1 interpolant (consistent-mass quadratic form)."""
    values = _check_field(mesh, values)
    m = assemble_mass(mesh)
    return float(np.sqrt(max(values @ (m @ values), 0.0)))


def h1_seminorm(mesh: Mesh, values: NodalField) -> float:
    """L2 norm of the (element-wise constant) gradient."""
    values = _check_field(mesh, values)
    grads = element_gradients(mesh, values)
    measures = element_measures(mesh)
    return float(np.sqrt(max(measures @ np.sum(grads * grads, axis=1), 0.0)))
