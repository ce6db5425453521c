"""Energy-dissipating, conservation-preserving particle methods for nonlinear
continuity equations (aggregation-diffusion and 2D Landau), integrated in time
with the mean-value discrete gradient."""

from .diagnostics import (
    BKW,
    Barenblatt,
    DiagnosticsRecord,
    HeatKernel,
    LinearFP,
    analytic_value,
    convergence_order,
    dissipation_rate,
    error_norms,
    fisher_information,
    kinetic_energy,
    mass,
    momentum,
)
from .dynamics import velocity_aggdiff, velocity_landau
from .ensemble import ParticleEnsemble, QuadratureGrid, build_grid, init_from_density, reconstruct_density
from .errors import ConfigError, ConvergenceError, EmptyEnsembleError, NumericalDomainError
from .integrators import (
    FixedPointConfig,
    MeanValueConfig,
    StepResult,
    mean_value_gradient,
    step_aggdiff,
    step_landau,
)
from .models import (
    AggregationDiffusion,
    CollisionKernel,
    Landau,
    LogEntropy,
    Mollifier,
    PotentialSpec,
    PowerLaw,
    default_epsilon,
    energy_value,
    grad_energy,
    h_eps,
    kernel_matrix_apply,
    potential,
)
from .scenarios import RunReport, ScenarioConfig, check, converge, load_config, parse_config, run

__version__ = "0.1.0"
