"""Exception hierarchy for the solver package."""


class PnpError(Exception):
    """Base class for all solver errors."""


class InvalidGridError(PnpError):
    """Grid construction parameters are inconsistent."""


class ConfigError(PnpError):
    """A run configuration is malformed or self-contradictory."""


class CompatibilityError(PnpError):
    """Boundary data and total charge do not balance."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class UnsolvableSystemError(PnpError):
    """The Neumann Poisson system has no solution for the given data."""

    def __init__(self, message: str, defect: float = float("nan")):
        super().__init__(message)
        self.defect = defect


class CflViolationError(PnpError):
    """Requested time step exceeds the provable stability bound."""

    def __init__(self, message: str, max_dt: float = float("nan")):
        super().__init__(message)
        self.max_dt = max_dt


class PositivityError(PnpError):
    """A concentration went negative during an explicit update."""


class SolverFailure(PnpError):
    """Internal linear-algebra failure (singular or non-finite system)."""
