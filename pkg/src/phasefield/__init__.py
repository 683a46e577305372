"""Energy-stable P1 finite element solver for Allen-Cahn type gradient flows."""

from .diagnostics import (
    InterfaceCurve,
    SharpInterfaceCircle,
    circle_reference_area,
    estimate_front_speed,
    extract_interface,
    front_position_1d,
    phase_area,
    wave_speed_constant,
)
from .fem import (
    NodalField,
    SparseMatrix,
    assemble_mass,
    assemble_secant_load,
    assemble_stiffness,
    assemble_weighted_mass,
    element_gradient,
    element_gradients,
    energy,
    h1_seminorm,
    l2_norm,
)
from .mesh import Mesh, build_interval_mesh, build_rect_mesh, element_geometry
from .model import (
    ModelParams,
    MobilitySpec,
    PotentialSpec,
    allen_cahn_params,
    hybrid_params,
    mobility_value,
    potential_derivative,
    potential_value,
    secant_slope,
    validate_assumptions,
)
from .stepper import (
    FixedPointError,
    LinearSolveError,
    StepConfig,
    StepOperators,
    StepReport,
    advance,
    dissipation_identity_residual,
    fixed_point_step,
    solve_spd,
)

__version__ = "0.1.0"
