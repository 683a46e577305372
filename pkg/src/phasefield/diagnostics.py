"""Observables of the interface evolution.

Scalar observables (super-level-set area, front position, front speed)
and the extracted 1/2-level interface, plus the closed-form shrinking
circle reference against which the curvature-driven runs are compared.
The area of {S > threshold} is computed by clipping the linear
interpolant element by element, which avoids quadrature staircase
artifacts in the area traces.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fem import NodalField, _check_field
from .mesh import Mesh, element_measures
from .model import PotentialSpec, potential_value


@dataclass(frozen=True)
class InterfaceCurve:
    """Level-set polyline at a fixed time.

    2D: segments has shape (n, 2, 2), one vertex pair per crossing
    element.  1D: points holds the crossing coordinates.
    """

    dim: int
    segments: np.ndarray
    points: np.ndarray

    def total_length(self) -> float:
        if self.segments.size == 0:
            return 0.0
        d = self.segments[:, 1] - self.segments[:, 0]
        return float(np.sum(np.sqrt(np.sum(d * d, axis=1))))


@dataclass(frozen=True)
class SharpInterfaceCircle:
    """Shrinking-circle reference: r' = -c sqrt(lam) / r."""

    r0: float
    c_const: float
    lam: float

    def __post_init__(self):
        if self.r0 <= 0 or self.c_const <= 0 or self.lam <= 0:
            raise ValueError("circle reference parameters must be positive")


def phase_area(mesh: Mesh, values: NodalField, threshold: float = 0.5) -> float:
    """Measure of {S_h > threshold}, exact for the P1 interpolant."""
    values = _check_field(mesh, values)
    v = values[mesh.elements]
    measures = element_measures(mesh)
    above = v > threshold

    if mesh.dim == 1:
        n_above = above.sum(axis=1)
        area = np.where(n_above == 2, measures, 0.0)
        split = n_above == 1
        if np.any(split):
            va = np.where(above[split], v[split], 0.0).sum(axis=1)
            vb = np.where(~above[split], v[split], 0.0).sum(axis=1)
            frac = (va - threshold) / (va - vb)
            area[split] = measures[split] * frac
        return float(area.sum())

    n_above = above.sum(axis=1)
    area = np.where(n_above == 3, measures, 0.0)
    for count, complement in ((1, False), (2, True)):
        mask = n_above == count
        if not np.any(mask):
            continue
        vm = v[mask]
        am = above[mask] if count == 1 else ~above[mask]
        # rotate the singleton vertex to position 0
        order = np.argsort(~am, axis=1, kind="stable")
        vm = np.take_along_axis(vm, order, axis=1)
        f1 = (vm[:, 0] - threshold) / (vm[:, 0] - vm[:, 1])
        f2 = (vm[:, 0] - threshold) / (vm[:, 0] - vm[:, 2])
        corner = measures[mask] * np.abs(f1 * f2)
        area[mask] = measures[mask] - corner if complement else corner
    return float(area.sum())


def extract_interface(mesh: Mesh, values: NodalField,
                      level: float = 0.5) -> InterfaceCurve:
    """Polyline {S_h = level} by edge-wise inverse interpolation.

    Vertices sitting exactly on the level count as above, which makes
    degenerate crossings deterministic.  An empty curve is valid.
    """
    values = _check_field(mesh, values)
    v = values[mesh.elements]
    above = v >= level

    if mesh.dim == 1:
        crossing = above[:, 0] != above[:, 1]
        coords = mesh.vertices[mesh.elements[crossing], 0]
        vc = v[crossing]
        t = (level - vc[:, 0]) / (vc[:, 1] - vc[:, 0])
        pts = coords[:, 0] + t * (coords[:, 1] - coords[:, 0])
        return InterfaceCurve(dim=1, segments=np.empty((0, 2, 2)),
                              points=np.sort(pts))

    n_above = above.sum(axis=1)
    mask = (n_above == 1) | (n_above == 2)
    if not np.any(mask):
        return InterfaceCurve(dim=2, segments=np.empty((0, 2, 2)),
                              points=np.empty(0))
    vm = v[mask]
    am = above[mask]
    singleton_above = n_above[mask] == 1
    am = np.where(singleton_above[:, None], am, ~am)
    order = np.argsort(~am, axis=1, kind="stable")
    vm = np.take_along_axis(vm, order, axis=1)
    coords = mesh.vertices[mesh.elements[mask]]
    coords = np.take_along_axis(coords, order[:, :, None], axis=1)
    segments = np.empty((vm.shape[0], 2, 2))
    for side, j in ((0, 1), (1, 2)):
        t = (level - vm[:, 0]) / (vm[:, j] - vm[:, 0])
        segments[:, side] = coords[:, 0] + t[:, None] * (coords[:, j] - coords[:, 0])
    return InterfaceCurve(dim=2, segments=segments, points=np.empty(0))


def circle_reference_area(t: float, ref: SharpInterfaceCircle) -> float:
    """Enclosed area of the shrinking circle, clipped at extinction."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return max(math.pi * ref.r0 ** 2
               - 2.0 * math.pi * ref.c_const * math.sqrt(ref.lam) * t, 0.0)


def front_position_1d(mesh: Mesh, values: NodalField,
                      level: float = 0.5) -> float:
    """Rightmost crossing of the level on a 1D mesh."""
    if mesh.dim != 1:
        raise ValueError("front position is a 1D observable")
    curve = extract_interface(mesh, values, level)
    if curve.points.size == 0:
        raise ValueError(f"no crossing of level {level}")
    return float(curve.points[-1])


def estimate_front_speed(times: np.ndarray, positions: np.ndarray,
                         skip_fraction: float = 0.1) -> float:
    """Ordinary least-squares slope of position versus time.

    By default the first 10% of the samples are discarded, which skips
    the initial-layer transient when the series starts from
    characteristic-function data; pass skip_fraction=0 to fit everything.
    """
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    if times.shape != positions.shape or times.size < 2:
        raise ValueError("need at least two (time, position) samples")
    if not 0.0 <= skip_fraction < 1.0:
        raise ValueError("skip_fraction must lie in [0, 1)")
    skip = int(skip_fraction * times.size)
    if times.size - skip >= 2:
        times = times[skip:]
        positions = positions[skip:]
    t = times - times.mean()
    denom = float(t @ t)
    if denom == 0.0:
        raise ValueError("degenerate time samples")
    return float(t @ (positions - positions.mean()) / denom)


def wave_speed_constant(n_points: int = 20) -> float:
    """Gauss value of the integral of sqrt(2 psi(S)) over [0, 1].

    The integrand reduces to 2*sqrt(2)*S(1-S), so the analytic value is
    sqrt(2)/3 and a 2-point rule is already exact.
    """
    if n_points < 2:
        raise ValueError("need at least two quadrature points")
    x, w = np.polynomial.legendre.leggauss(n_points)
    s = 0.5 * (x + 1.0)
    psi = potential_value(PotentialSpec(force_slope=0.0), s)
    return float(0.5 * w @ np.sqrt(2.0 * psi))
