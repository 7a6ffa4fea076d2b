"""Exception types raised across the package."""


class DomainError(ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class BracketError(RuntimeError):
    """A root-finding interval does not contain a sign change."""


class SolverError(RuntimeError):
    """An iterative solver failed to meet its tolerance."""


class EstimationError(RuntimeError):
    """Not enough tail mass in a queue trace to fit a decay exponent."""


class InstabilityError(RuntimeError):
    """The simulated queue is not stable (arrivals exceed mean service)."""
