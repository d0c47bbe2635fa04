"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters, grids or configuration files."""


class SolverError(RuntimeError):
    """A numerical procedure failed to converge or hit a singular system."""


class ResourceError(RuntimeError):
    """A requested problem size exceeds the configured limits."""


class ContractViolation(ValueError):
    """A function was called with inputs that break its documented contract."""
