"""Error types raised by the solver and the command line front end."""


class NgAdaptError(Exception):
    """Base class for all solver errors."""


class ConfigError(NgAdaptError):
    """Malformed, incomplete, or unknown configuration input."""


class InitialDatumError(NgAdaptError):
    """The initial datum cannot be represented within its tolerance on the
    given mesh."""


class TimeStepUnderflow(NgAdaptError):
    """The step size controller fell below the configured floor."""


class NonSolvableLinearization(NgAdaptError):
    """Elimination broke down while solving a linearized step system."""


class NonlinearityEvaluationError(NgAdaptError):
    """The reaction term or its derivative produced a non-finite value."""


class SafetyValveExceeded(NgAdaptError):
    """An iteration cap (Newton or refinement) was exhausted within one step."""
