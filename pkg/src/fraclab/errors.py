"""Exception taxonomy shared across the package.

Every error carries an ``exit_code`` so the command line tool can map
failures onto its contract: 2 for configuration and validation problems,
3 for numeric failures, 4 for nonconvergence.
"""

from __future__ import annotations


class FraclabError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ConfigError(FraclabError):
    """Malformed or rejected run configuration."""


class ExpressionError(FraclabError):
    """Problem with an arithmetic field expression."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ParseError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


class ArityMismatchError(ExpressionError):
    pass


class FieldError(FraclabError):
    """Invalid exponent field usage."""


class BoundViolationError(FieldError):
    """A field escaped its admissible range on the sample set."""

    def __init__(self, message: str, point=None, value=None):
        super().__init__(message)
        self.point = point
        self.value = value


class DomainError(FraclabError):
    """Degenerate or unsupported mesh request."""


class GridFunctionError(FraclabError):
    """Grid function values inconsistent with their domain."""


class MeshError(FraclabError):
    """Corrupt mesh data detected during pair evaluation."""

    exit_code = 3


class ModularError(FraclabError):
    """Invalid argument to a modular evaluation."""


class MeshInconsistencyError(FraclabError):
    """Boundary values inconsistent with a vanishing interior."""

    exit_code = 3


class ConjugacyError(FraclabError):
    """Pointwise exponent conjugacy violated."""


class ParameterRangeError(FraclabError):
    """Scalar parameter outside its admissible open interval."""


class FamilyError(FraclabError):
    """Concentration family violates its admissibility inequalities."""


class SubcriticalityError(FraclabError):
    """Boundary exponent reaches or exceeds the critical trace exponent."""

    def __init__(self, message: str, witness=None, p_star=None, q_value=None):
        super().__init__(message)
        self.witness = witness
        self.p_star = p_star
        self.q_value = q_value


class PartitionError(FraclabError):
    """Covering construction could not certify the requested margins."""


class ProblemError(FraclabError):
    """Energy problem data fails validation."""


class NumericError(FraclabError):
    """Generic numeric failure in a computation path."""

    exit_code = 3
