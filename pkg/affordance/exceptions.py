"""
Exception hierarchy for the affordance package.

Every error derives from AffordanceError and from the builtin a caller would
expect for that failure, so `except ValueError` keeps working.
"""


class AffordanceError(Exception):
    """Base class for all package errors"""


class InvalidArgumentError(AffordanceError, ValueError):
    """An argument is outside its documented domain (bad shape, range, index)"""


class NumericOverflowError(AffordanceError, ArithmeticError):
    """An update or target would produce non-finite numbers"""


class ModelVersionError(AffordanceError, ValueError):
    """Model file written with an unsupported format version"""


class CorruptModelError(AffordanceError, ValueError):
    """Model file is truncated or otherwise unreadable"""


class EnvironmentProtocolError(AffordanceError, RuntimeError):
    """Environment used out of order, e.g. stepping after a terminal state"""


class ModelNotAvailableError(AffordanceError, RuntimeError):
    """Environment cannot expose a finite transition model"""


class NoSolutionError(AffordanceError, RuntimeError):
    """Evaluation system is singular or trajectories never terminate"""


class ResourceLimitError(AffordanceError, RuntimeError):
    """Exhaustive computation would exceed the configured size guard"""


class CoverageViolationError(AffordanceError, ValueError):
    """Behavior policy gives zero probability to an action the target policy takes"""

    def __init__(self, message, demon=None):
        super().__init__(message)
        self.demon = demon


class PolicyMismatchError(AffordanceError, ValueError):
    """On-policy learner was fed off-policy experience"""


class ConfigurationError(AffordanceError, ValueError):
    """Experiment configuration is malformed or references unknown names"""
