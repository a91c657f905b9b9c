"""Regime-adaptive flow on 1D discrete fracture networks.

The package solves mass-conservative velocity/pressure problems on networks
of 1D fractures where the constitutive law switches between a low-speed and a
high-speed branch at a threshold on the velocity magnitude. The interface
between the two regimes is part of the unknowns and is tracked by an outer
fixed-point loop; an energy-minimization reduction provides an independent
oracle for single-fracture problems.
"""

from .config import (
    ConfigError,
    OutputSettings,
    ProblemSpec,
    SolverSettings,
    load_config,
    parse_config,
    spec_to_dict,
)
from .energy import (
    EnergyReport,
    GridSpec,
    LiftedField,
    MinimizationResult,
    ProbeReport,
    energy_of,
    lift_field,
    local_minimality_probe,
    reduce_and_minimize,
    tangential_forcing,
)
from .export import ResultBundle, bundle_from_report, export_bundle, load_bundle
from .fem import (
    RegimeField,
    SaddleSystem,
    SingularSystemError,
    Solution,
    assemble,
    implied_junction_pressures,
    lift_pressure_data,
    solve_saddle,
    source_integrals,
)
from .laws import (
    AdaptiveLaw,
    AffineSpeedLaw,
    ConstantLaw,
    ConvexityReport,
    CustomLaw,
    GrowthReport,
    JumpSign,
    PsiPotential,
    Regime,
    build_psi,
    check_growth_bound,
    convexity_probe,
    eval_lambda_coefficient,
    jump_sign,
)
from .meshing import Mesh, build_mesh, split_mesh_at
from .network import (
    BoundarySpec,
    Branch,
    FractureNetwork,
    Intersection,
    PiecewiseSource,
    PressureBC,
    SourceSpec,
    ValidationReport,
    VelocityBC,
    validate_network,
)
from .picard import PicardResult, PicardSettings, picard_solve
from .presets import PRESET_NAMES, run_preset, run_spec
from .tracker import (
    Configuration,
    TrackerReport,
    TrackerSettings,
    TrackerStatus,
    classify_endpoints,
    configuration_distance,
    locate_interface,
    track,
)

__version__ = "0.1.0"
