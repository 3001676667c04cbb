"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid user-supplied geometry, coefficients, or experiment settings."""


class AssemblyError(RuntimeError):
    """An assembled matrix failed an internal consistency check."""


class SolverError(RuntimeError):
    """An eigenvalue or linear solve failed to meet its accuracy contract."""
