__all__ = [
    "HemoflowError",
    "DomainError",
    "ConfigurationError",
    "SchemaError",
    "HyperbolicityError",
    "PositivityError",
    "TimeStepError",
    "BoundarySolveError",
    "NonFiniteError",
    "TrainingAborted",
]


class HemoflowError(Exception):
    """Base class of all errors raised by this package"""


class DomainError(HemoflowError, ValueError):
    """Argument outside the validity range of a constitutive relation"""


class ConfigurationError(HemoflowError, ValueError):
    """Invalid run configuration, grid or tableau"""


class SchemaError(HemoflowError, ValueError):
    """Malformed waveform or field file

    The offending (1-based, header included) row is stored in `row`, or
    `None` if the error is not tied to a row.
    """

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class HyperbolicityError(HemoflowError, ArithmeticError):
    """Loss of a real, complete eigenstructure at some cell interface"""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class PositivityError(HemoflowError, ArithmeticError):
    """Non-positive cross-sectional area after a solver update"""

    def __init__(self, message, cell=None, time=None):
        super().__init__(message)
        self.cell = cell
        self.time = time


class TimeStepError(HemoflowError, ArithmeticError):
    """Time step fell below the admissible floor"""


class BoundarySolveError(HemoflowError, ArithmeticError):
    """Boundary coupling failed to converge or left the valid domain"""


class NonFiniteError(HemoflowError, ArithmeticError):
    """Non-finite loss, residual or gradient

    The loss term or parameter group responsible is stored in `label`.
    """

    def __init__(self, message, label=None):
        super().__init__(message)
        self.label = label


class TrainingAborted(HemoflowError, RuntimeError):
    """Training stopped early; the last finite state is at `checkpoint`"""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
