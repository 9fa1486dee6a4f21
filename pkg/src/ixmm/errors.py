"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class StabilityError(ConfigError):
    """Explicit-scheme stability bound violated by the chosen time step."""


class NumericalError(Exception):
    """Numerical failure during a solve, e.g. non-finite values (CLI exit code 3)."""


class InvalidRunError(Exception):
    """A simulation run was flagged invalid, e.g. inventory clamps (CLI exit code 4)."""
