"""Becker-Doring cluster kinetics coupled to an Allen-Cahn phase field.

Numerical simulator with built-in thermodynamic validation (mass
conservation, free-energy dissipation) and an equilibrium-state solver.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AssumptionViolation,
    BDPhaseError,
    ConfigError,
    DegenerateStateError,
    DissipationViolationError,
    DomainError,
    EquilibriumError,
    KernelWidthError,
    RateOverflowError,
    StepFailureError,
)
from .kinetics import (  # noqa: F401
    RateModel,
    StepReport,
    GrowthReport,
    arrhenius_rate,
    b_mix,
    check_growth_assumptions,
    count_n,
    effective_k,
    evaporation_coeff,
    fluxes,
    integrate_cell,
    rho,
    rhs,
    self_consistent_k,
    step_cell,
    x_norm,
)
