"""Unified gradient-flow model: coefficients, mobility and potential.

The evolution equation treated by the solver is

    c(|grad S|) dS/dt = div(alpha grad S) - beta d'(S)

with free energy E(S) = integral of (alpha/2)|grad S|^2 + beta d(S).
Two parameter mappings are provided: a generalized Allen-Cahn model
(constant mobility) and a level-set-like "hybrid" model whose mobility
is a clamped reciprocal of the gradient magnitude.

The potential is fixed to a double well plus a linear forcing term,

    d(s) = 4 s^2 (1 - s)^2 + C s,

and the implicit scheme consumes it through the secant difference
quotient (d(a) - d(b)) / (a - b), evaluated in closed polynomial form so
a = b needs no special casing.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PotentialSpec:
    """Double-well potential with linear forcing slope C."""

    force_slope: float = 0.0


@dataclass(frozen=True)
class MobilitySpec:
    """Mobility coefficient c(x), x = |grad S|.

    Either a positive constant, or the clamped reciprocal
    c(x) = 1 / max(delta, min(1/delta, x)) with delta in (0, 1], which
    keeps c within [delta, 1/delta].
    """

    kind: str
    value: float = 0.0
    delta: float = 0.0

    @classmethod
    def constant(cls, value: float) -> "MobilitySpec":
        if not value > 0:
            raise ValueError(f"constant mobility must be positive, got {value}")
        return cls(kind="constant", value=float(value))

    @classmethod
    def inverse_clamped(cls, delta: float) -> "MobilitySpec":
        if not 0 < delta <= 1:
            raise ValueError(f"clamp parameter must lie in (0, 1], got {delta}")
        return cls(kind="inverse_clamped", delta=float(delta))

    def bounds(self) -> tuple[float, float]:
        """Lower and upper bounds of c over all arguments."""
        if self.kind == "constant":
            return self.value, self.value
        return self.delta, 1.0 / self.delta


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the unified equation; alpha, beta > 0."""

    alpha: float
    beta: float
    mobility: MobilitySpec
    potential: PotentialSpec

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


def allen_cahn_params(mu: float, lam: float, c_const: float,
                      force_slope: float = 0.0) -> ModelParams:
    """Generalized Allen-Cahn coefficients.

    alpha = sqrt(mu)*lam, beta = 1/sqrt(mu), constant mobility
    sqrt(mu*lam)/c_const.  The forcing slope is scaled by sqrt(mu) so
    that beta*d(S) reproduces the Allen-Cahn energy density exactly.
    """
    if mu <= 0 or lam <= 0 or c_const <= 0:
        raise ValueError("mu, lam and c_const must be positive")
    return ModelParams(
        alpha=math.sqrt(mu) * lam,
        beta=1.0 / math.sqrt(mu),
        mobility=MobilitySpec.constant(math.sqrt(mu * lam) / c_const),
        potential=PotentialSpec(force_slope=math.sqrt(mu) * force_slope),
    )


def hybrid_params(nu: float, delta: float,
                  force_slope: float = 0.0) -> ModelParams:
    """Hybrid (level-set-like) coefficients: alpha = nu, beta = 1,
    mobility 1/|grad S| clamped to [delta, 1/delta]."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return ModelParams(
        alpha=nu,
        beta=1.0,
        mobility=MobilitySpec.inverse_clamped(delta),
        potential=PotentialSpec(force_slope=force_slope),
    )


def potential_value(p: PotentialSpec, s):
    """d(s) = 4 s^2 (1-s)^2 + C s."""
    s = np.asarray(s, dtype=float)
    return 4.0 * s * s * (1.0 - s) ** 2 + p.force_slope * s


def potential_derivative(p: PotentialSpec, s):
    """d'(s) = 8 s (1-s)(1-2s) + C."""
    s = np.asarray(s, dtype=float)
    return 8.0 * s * (1.0 - s) * (1.0 - 2.0 * s) + p.force_slope


def secant_slope(p: PotentialSpec, s, s_prev):
    """Difference quotient (d(s) - d(s_prev)) / (s - s_prev), closed form.

    Evaluated as the polynomial
        4 (s^3 + s^2 (s_prev - 2) + s (s_prev - 1)^2 + s_prev (s_prev - 1)^2) + C
    which removes the singularity at s = s_prev and reduces to d'(s)
    there.
    """
    a = np.asarray(s, dtype=float)
    b = np.asarray(s_prev, dtype=float)
    apb = a + b
    bm1sq = (b - 1.0) * (b - 1.0)
    return 4.0 * (a * a * (apb - 2.0) + apb * bm1sq) + p.force_slope


def mobility_value(m: MobilitySpec, x):
    """Evaluate the mobility at gradient magnitude x >= 0."""
    x = np.asarray(x, dtype=float)
    if m.kind == "constant":
        out = np.full(x.shape, m.value)
    else:
        out = 1.0 / np.maximum(m.delta, np.minimum(1.0 / m.delta, x))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AssumptionReport:
    """Sampled coefficient bounds; informative only, never blocking.

    The growth witness certifies d(s) >= growth_rate*|s| - growth_offset
    at every sampled s.
    """

    c_lower: float
    c_upper: float
    d_min: float
    growth_rate: float
    growth_offset: float
    d2_max: float
    mobility_positive: bool
    potential_nonnegative: bool


def validate_assumptions(p: ModelParams, s_range: tuple[float, float],
                         x_range: tuple[float, float],
                         samples: int = 1001) -> AssumptionReport:
    """Sample c on x_range and d on s_range and report observed bounds."""
    if samples < 2:
        raise ValueError("need at least two samples")
    s = np.linspace(s_range[0], s_range[1], samples)
    x = np.linspace(x_range[0], x_range[1], samples)
    c = np.asarray(mobility_value(p.mobility, x))
    d = potential_value(p.potential, s)
    d2 = np.abs(8.0 * (6.0 * s * s - 6.0 * s + 1.0))

    # Tail slope of d as growth-rate candidate, offset chosen so the
    # linear bound holds at every sample.
    abs_s = np.abs(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(abs_s > 0, d / np.where(abs_s > 0, abs_s, 1.0), np.inf)
    rate = max(0.0, float(min(tail[0], tail[-1])))
    offset = float(max(0.0, np.max(rate * abs_s - d)))

    return AssumptionReport(
        c_lower=float(c.min()),
        c_upper=float(c.max()),
        d_min=float(d.min()),
        growth_rate=rate,
        growth_offset=offset,
        d2_max=float(d2.max()),
        mobility_positive=bool(c.min() > 0),
        potential_nonnegative=bool(d.min() >= 0),
    )
