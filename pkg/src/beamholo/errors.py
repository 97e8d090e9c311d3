"""Exception hierarchy shared by every module.

Each family carries an ``exit_code`` so the command line front end can map
failures to distinct process statuses.
"""


class BeamHoloError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidParameterError(BeamHoloError, ValueError):
    exit_code = 10


class IncompatibleGridError(BeamHoloError, ValueError):
    exit_code = 11


class DivergenceError(BeamHoloError, ArithmeticError):
    """Raised when an optimizer produces a non-finite loss."""

    exit_code = 20

    def __init__(self, iteration, loss):
        super().__init__(f"non-finite loss {loss!r} at iteration {iteration}")
        self.iteration = iteration
        self.loss = loss


class AmplitudeOverflowError(BeamHoloError, ValueError):
    exit_code = 21


class InvalidDirectionError(BeamHoloError, ValueError):
    exit_code = 30


class OffShellError(BeamHoloError, ArithmeticError):
    """k-vector closure has no real solution."""

    exit_code = 31


class GrazingDiffractionError(BeamHoloError, ArithmeticError):
    exit_code = 32


class NumericalInconsistencyError(BeamHoloError, ArithmeticError):
    exit_code = 33


class InvalidAngleError(BeamHoloError, ValueError):
    exit_code = 34


class DegenerateBaselineError(BeamHoloError, ArithmeticError):
    exit_code = 40


class ConfigError(BeamHoloError, ValueError):
    exit_code = 2


class GridFormatError(BeamHoloError, ValueError):
    exit_code = 3
