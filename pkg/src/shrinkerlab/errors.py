"""Exception types raised across shrinkerlab."""


class ShrinkerLabError(Exception):
    """Base class for all package errors."""


class PreconditionError(ShrinkerLabError, ValueError):
    """An input violates a documented precondition."""


class UnsupportedProductError(PreconditionError):
    """Requested sphere x Euclidean product is outside the supported family."""


class RemeshRequired(ShrinkerLabError):
    """Node spacing degenerated; the curve must be resampled first."""


class ConvergenceError(ShrinkerLabError):
    """An iterative solver or root bracket failed to converge."""


class SingularityError(ShrinkerLabError):
    """The flow hit a curvature blow-up or exhausted its step budget."""


class NotCertifiedError(ShrinkerLabError):
    """A state failed the near-cylindrical closeness certificate."""


class ConfigError(ShrinkerLabError, ValueError):
    """Experiment configuration is missing fields or has invalid values."""


class SchemaMismatch(ShrinkerLabError):
    """Two output directories do not share the same file or column layout."""
