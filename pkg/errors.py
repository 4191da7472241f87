"""
Exception types raised by the bracket checker
"""


class BracketCheckError(Exception):
    """Base class for every error raised by this package"""


class ArgumentError(BracketCheckError, ValueError):
    """Invalid argument: bad slot, unknown preset, wrong shape"""


class DomainError(BracketCheckError):
    """Evaluation point lies in an excluded or singular region"""


class NumericError(BracketCheckError, ArithmeticError):
    """Non-finite values, singular metric or a solver that did not converge"""


class CapabilityError(BracketCheckError):
    """An observable cannot supply the partial derivatives requested"""


class ScenarioError(ArgumentError):
    """Malformed scenario file"""

    def __init__(self, message, path="", line=None):
        self.path = path
        self.line = line
        where = path or "<scenario>"
        if line is not None:
            where = f"line {line}: {where}"
        super().__init__(f"{where}: {message}")


class DomainExitError(DomainError):
    """A trajectory left the valid domain; carries the samples computed so far"""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
