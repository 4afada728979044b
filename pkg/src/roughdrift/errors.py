"""Exception types shared across the package."""


class RoughDriftError(Exception):
    """Base class for library errors."""


class DomainError(RoughDriftError, ValueError):
    """Input outside the domain where an operation is defined."""


class IntegrityError(RoughDriftError):
    """A constructed object violates an algebraic identity it must satisfy."""


class ConvergenceError(RoughDriftError):
    """An iterative scheme failed to converge."""


class ConfigError(RoughDriftError, ValueError):
    """Invalid experiment configuration."""
