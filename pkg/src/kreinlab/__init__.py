"""Finite-difference laboratory for eigenvalue counting bounds of the
Krein-von Neumann and Friedrichs extensions of even-order elliptic operators
on arbitrary bounded grid domains."""

from .assembly import (
    ExtensionOperator,
    HermitianOperator,
    Tau2Stencil,
    apply_gauge,
    assemble_friedrichs,
    assemble_krein_pencil,
    assemble_tau2,
    extension_operator,
    write_matrix,
)
from .bounds import (
    BoundConstants,
    MinimizationResult,
    bound_constants,
    friedrichs_bound,
    friedrichs_minimum,
    friedrichs_minimum_oracle,
    friedrichs_shape_factor,
    krein_bound,
    krein_minimum,
    krein_minimum_oracle,
    krein_profile,
    krein_shape_factor,
    shape_factor_chain,
    unit_ball_volume,
    weyl_leading,
    weyl_leading_angular,
)
from .eigensolve import (
    Spectrum,
    counting,
    hermitian_eigs,
    pencil_eigs,
    trust_cutoff,
    write_spectrum,
)
from .errors import AssemblyError, ConfigError, SolverError
from .experiment import BoundReport, ExperimentConfig, run_counting_experiment
from .grid import (
    CoefficientField,
    GridDomain,
    build_domain,
    fatten,
    load_mask,
    sample_coefficients,
    save_mask,
)
from .scattering import (
    CphiEstimate,
    DistortedWave,
    ScatteringProblem,
    cphi_estimate,
    default_xi_grid,
    green_kernel,
    solve_lippmann_schwinger,
    uniform_problem,
)
from .verify import run_verify_suite

__version__ = "0.1.0"
