"""Exception hierarchy shared across the toolkit."""


class SliceRouteError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SliceRouteError):
    """Tensor shapes are incompatible for the requested operation."""


class ParameterError(SliceRouteError):
    """A hyperparameter value is outside its valid range."""


class DomainError(SliceRouteError):
    """A value lies outside the mathematical domain of an operation."""


class GraphError(SliceRouteError):
    """The differentiation contract was violated (e.g. backward on a non-scalar)."""


class StateError(SliceRouteError):
    """Optimizer state does not match the parameters it is applied to."""


class InputError(SliceRouteError):
    """Malformed model input (unknown vocabulary id, empty sequence, ...)."""


class ConfigError(SliceRouteError):
    """A configuration file or value is invalid."""


class SplitError(SliceRouteError):
    """A dataset split request is degenerate."""


class StartupError(SliceRouteError):
    """A required input artifact (dataset, checkpoint) is missing or unreadable."""


class TrainingDiverged(SliceRouteError):
    """Training produced a non-finite loss."""
