"""Structure-preserving finite difference solver for coupled drift-diffusion
of charged species with a self-consistent electrostatic potential.

The explicit scheme conserves the mass of every species exactly, keeps
concentrations nonnegative below a computable mesh-ratio bound, and
dissipates the discrete free energy.  See the README for the file formats
and the `pnp` command-line interface.
"""

from .diagnostics import (
    EnergyReport,
    SteadyStateReport,
    detect_steady,
    dissipation_rate,
    free_energy,
    long_time_energy_stability,
)
from .errors import (
    CflViolationError,
    CompatibilityError,
    ConfigError,
    InvalidGridError,
    PnpError,
    PositivityError,
    SolverFailure,
    UnsolvableSystemError,
)
from .grid import Grid1D, Grid2D, build_grid_1d, build_grid_2d
from .harness import (
    ConvergenceRow,
    SpeciesSpec,
    TestCase,
    builtin_cases,
    case_by_name,
    cubic_spline_eval,
    discretize,
    linf_error,
    observed_orders,
    run_convergence_study,
    simulate_to_time,
)
from .poisson import (
    BoundaryData1D,
    BoundaryData2D,
    charge_source,
    check_compatibility,
    potential_increments_1d,
    solve_poisson_1d,
    solve_poisson_2d,
)
from .scheme import (
    CflBound,
    SpeciesState,
    StepReport,
    cfl_2d,
    cfl_lambda0,
    cfl_multi,
    euler_step,
    max_stable_dt,
    semi_discrete_rhs_1d,
    semi_discrete_rhs_2d,
    step_coupled,
)

__version__ = "0.1.0"
