"""Exception types shared by all qosc modules."""


class QoscError(Exception):
    """Base class for every error raised by qosc."""


class ParameterError(QoscError, ValueError):
    """A parameter is outside its allowed domain."""


class InvalidProfileError(ParameterError):
    """A gain magnitude profile is malformed (non-positive, non-uniform grid, ...)."""


class ConfigError(ParameterError):
    """A simulation or run configuration violates a guard."""


class NotLasingError(ParameterError):
    """The requested quantity only exists above the lasing threshold."""


class NumericalError(QoscError, ArithmeticError):
    """A numerical procedure failed (non-convergence, bad resolution, ...)."""


class PoleError(NumericalError):
    """Evaluation landed on (or within epsilon of) a pole of a transfer function."""


class ResolutionError(NumericalError):
    """The sampling grid is too coarse for the requested transform."""


class CausalityError(NumericalError):
    """A peaked gain profile produced a non-positive group delay."""


class NoCutoffError(NumericalError):
    """No crossing with the beta-separation line was found."""


class MethodMismatchError(NumericalError):
    """The spectrum does not satisfy the precondition of the chosen estimator."""


class FormatError(ParameterError):
    """A data file does not follow the expected layout."""
