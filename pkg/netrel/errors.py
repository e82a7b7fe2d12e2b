"""
Domain Exceptions
Every failure kind the toolkit reports has its own class so callers (and the CLI)
can tell invalid input apart from numerical trouble.
"""

from typing import Optional


class InvalidStateError(ValueError):
    """A state vector holds a label its dimension does not declare."""

    def __init__(self, dimension: int, label: object):
        self.dimension = dimension
        self.label = label
        super().__init__(f"Unknown state label {label!r} in dimension {dimension}")


class ShapeMismatchError(ValueError):
    """Two objects that must share a dimension layout do not."""


class DegenerateWeightsError(ArithmeticError):
    """A weight vector carries no mass (all zero or non-finite)."""


class UnsupportedPriorError(ValueError):
    """The prior cannot be used with the requested estimator (e.g. MAP with theta < 1)."""


class SupportViolationError(ArithmeticError):
    """A sample lies where the proposal density is zero, so the IS ratio is undefined."""


class UndefinedCovError(ArithmeticError):
    """Coefficient of variation requested for values with zero mean."""


class StateSpaceTooLargeError(ValueError):
    """Exact enumeration refused because the sample space is too large."""

    def __init__(self, size: float, limit: float):
        self.size = size
        self.limit = limit
        super().__init__(f"State space has {size:.3g} states, enumeration limit is {limit:.3g}")


class NonLatticeError(ValueError):
    """Weighted sums of a linear LSF do not lie on an integer lattice."""


class ParseError(ValueError):
    """Malformed record in a text input file."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}: "
        elif where:
            where = f"{where} "
        super().__init__(f"{where}{message}")


class NetworkFileError(ParseError):
    """Malformed network file."""


class CaseFileError(ParseError):
    """Malformed or inconsistent power-system case file."""


class PowerFlowSingularError(ArithmeticError):
    """Reduced susceptance matrix could not be factorized."""


class ConfigError(ValueError):
    """Experiment configuration is invalid or inconsistent."""
