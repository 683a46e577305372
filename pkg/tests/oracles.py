"""Independent brute-force oracles shared by the test modules.

These deliberately avoid the package's assembly and quadrature helpers:
integration uses raw Gauss points collapsed onto each element, and the
secant quotient is evaluated through the potential itself wherever the
arguments are separated.
"""

import numpy as np

from phasefield.model import potential_value, secant_slope


def brute_force_secant_load(mesh, values, values_prev, p, n_gauss=8):
    """Quadrature of the secant load, exact to degree 2*n_gauss - 2."""
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    t = 0.5 * (x + 1.0)
    wt = 0.5 * w
    out = np.zeros(mesh.n_vertices)
    for e in range(mesh.n_elements):
        conn = mesh.elements[e]
        coords = mesh.vertices[conn]
        if mesh.dim == 1:
            h = coords[1, 0] - coords[0, 0]
            for ti, wi in zip(t, wt):
                bary = np.array([1 - ti, ti])
                out[conn] += h * wi * _secant(values[conn], values_prev[conn],
                                              bary, p) * bary
        else:
            d1 = coords[1] - coords[0]
            d2 = coords[2] - coords[0]
            area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
            for ti, wi in zip(t, wt):
                for tj, wj in zip(t, wt):
                    l1 = ti
                    l2 = tj * (1 - ti)
                    bary = np.array([1 - l1 - l2, l1, l2])
                    weight = 2 * area * wi * wj * (1 - ti)
                    out[conn] += weight * _secant(values[conn],
                                                  values_prev[conn], bary, p) * bary
    return out


def _secant(vals, vals_prev, bary, p):
    a = float(bary @ vals)
    b = float(bary @ vals_prev)
    if abs(a - b) > 1e-8:
        return (potential_value(p, a) - potential_value(p, b)) / (a - b)
    return secant_slope(p, a, b)


def interpolate_at(mesh, values, point, tol=1e-9):
    """P1 interpolant value at a point, located by barycentric search."""
    for conn, xy in zip(mesh.elements, mesh.vertices[mesh.elements]):
        T = np.column_stack([xy[1] - xy[0], xy[2] - xy[0]])
        try:
            lam = np.linalg.solve(T, np.asarray(point) - xy[0])
        except np.linalg.LinAlgError:
            continue
        if lam.min() >= -tol and lam.sum() <= 1 + tol:
            bary = np.array([1 - lam.sum(), lam[0], lam[1]])
            return float(bary @ values[conn])
    raise ValueError(f"point {point} not inside the mesh")
