"""Exception hierarchy for the simulator.

All package errors derive from BDPhaseError so callers can catch one base
class; the CLI maps subclasses to distinct exit codes.
"""


class BDPhaseError(Exception):
    """Base class for all package errors."""


class DomainError(BDPhaseError, ValueError):
    """An argument lies outside its mathematical domain."""


class RateOverflowError(BDPhaseError, OverflowError):
    """A rate exponent exceeded the double-precision safety cap."""

    def __init__(self, alpha, exponent, cap):
        self.alpha = int(alpha)
        self.exponent = float(exponent)
        self.cap = float(cap)
        super().__init__(
            f"rate exponent {self.exponent:.6g} for cluster size alpha={self.alpha} "
            f"exceeds cap {self.cap:g}"
        )


class DegenerateStateError(BDPhaseError, ValueError):
    """A cluster state is degenerate for the requested operation
    (vanishing total count or vanishing monomer density)."""


class StepFailureError(BDPhaseError, RuntimeError):
    """A time step could not be completed within the retry budget."""

    def __init__(self, message, alpha=None, dt=None, cell=None):
        self.alpha = alpha
        self.dt = dt
        self.cell = cell
        detail = []
        if alpha is not None:
            detail.append(f"alpha={alpha}")
        if cell is not None:
            detail.append(f"cell={cell}")
        if dt is not None:
            detail.append(f"dt={dt:.3e}")
        if detail:
            message = f"{message} ({', '.join(detail)})"
        super().__init__(message)


class KernelWidthError(BDPhaseError, ValueError):
    """The mollifier kernel is wider than the spatial domain."""


class ConfigError(BDPhaseError, ValueError):
    """A configuration file is syntactically or structurally invalid."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"[{field}] {message}"
        super().__init__(message)


class AssumptionViolation(BDPhaseError, ValueError):
    """Validated input data violates one of the model admissibility
    assumptions (A1..A4)."""

    def __init__(self, assumption, message):
        self.assumption = assumption
        super().__init__(f"({assumption}) {message}")


class EquilibriumError(BDPhaseError, RuntimeError):
    """No equilibrium state exists or could be computed for the input."""


class DissipationViolationError(BDPhaseError, RuntimeError):
    """A run in strict mode detected a free-energy increase above tolerance."""
