"""Exception types shared across the package."""


class ProblemError(ValueError):
    """Base class for problems rejected by ``validate_problem``."""


class DimensionMismatch(ProblemError):
    pass


class MissingOracle(ProblemError):
    pass


class NonFiniteOutput(ProblemError):
    pass


class UnsupportedSetForDefaultY(ValueError):
    """No default multiplier box can be derived for this set; pass ``set_y``."""


class ConfigError(ValueError):
    """Raised when a ``SolverConfig`` field is out of range."""


class OracleFailure(RuntimeError):
    """A user oracle returned a non-finite value during a solve."""
