"""
Custom exception classes for the Open ASEP Shock Duality Lab.

Defines application-specific exceptions carrying a machine-readable error
code and a details payload, plus the mapping from exception type to CLI
exit code.
"""

from typing import Any, Dict, List, Optional


class DualityLabException(Exception):
    """Base exception class for the duality lab."""

    def __init__(
        self,
        message: str,
        error_code: str = "GENERAL_ERROR",
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(message)


class ParameterValidationError(DualityLabException):
    """Exception raised when model parameters violate their invariants."""

    def __init__(
        self,
        message: str,
        field_name: Optional[str] = None,
        validation_errors: Optional[List[str]] = None,
        details: Optional[Dict[str, Any]] = None,
        error_code: str = "PARAMETER_VALIDATION_ERROR"
    ):
        self.field_name = field_name
        self.validation_errors = validation_errors or []
        details = details or {}
        if field_name:
            details["field_name"] = field_name
        if validation_errors:
            details["validation_errors"] = validation_errors
        super().__init__(message, error_code, details)


class ConfigurationError(ParameterValidationError):
    """Exception raised when an experiment document is invalid."""

    def __init__(
        self,
        message: str,
        validation_errors: Optional[List[str]] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(
            message,
            validation_errors=validation_errors,
            details=details,
            error_code="CONFIGURATION_ERROR"
        )


class DimensionMismatchError(DualityLabException):
    """Exception raised when operand dimensions do not agree."""

    def __init__(
        self,
        message: str,
        expected: Optional[int] = None,
        actual: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.expected = expected
        self.actual = actual
        details = details or {}
        if expected is not None:
            details["expected"] = expected
        if actual is not None:
            details["actual"] = actual
        super().__init__(message, "DIMENSION_MISMATCH", details)


class ResourceCapError(DualityLabException):
    """Exception raised when a computation would exceed a configured cap."""

    def __init__(
        self,
        message: str,
        resource: Optional[str] = None,
        requested: Optional[float] = None,
        limit: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.resource = resource
        self.requested = requested
        self.limit = limit
        details = details or {}
        if resource:
            details["resource"] = resource
        if requested is not None:
            details["requested"] = requested
        if limit is not None:
            details["limit"] = limit
        super().__init__(message, "RESOURCE_CAP_EXCEEDED", details)


class NumericalError(DualityLabException):
    """Exception raised when a numerical postcondition fails."""

    def __init__(
        self,
        message: str,
        operation: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
        error_code: str = "NUMERICAL_ERROR"
    ):
        self.operation = operation
        details = details or {}
        if operation:
            details["operation"] = operation
        super().__init__(message, error_code, details)


class ManifoldSolveError(ParameterValidationError):
    """Exception raised when no positive-rate point of a manifold exists."""

    def __init__(
        self,
        message: str,
        candidates: Optional[Dict[str, float]] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.candidates = candidates or {}
        details = details or {}
        if candidates:
            details["candidates"] = candidates
        super().__init__(message, details=details, error_code="MANIFOLD_SOLVE_ERROR")


class StabilityError(ParameterValidationError):
    """Exception raised when a shock profile is not microscopically stable."""

    def __init__(
        self,
        message: str,
        shock_index: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.shock_index = shock_index
        details = details or {}
        if shock_index is not None:
            details["shock_index"] = shock_index
        super().__init__(message, details=details, error_code="STABILITY_ERROR")


class LinearDependenceError(NumericalError):
    """Exception raised when two local vectors are linearly dependent."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message,
            operation="projection_coefficients",
            details=details,
            error_code="LINEAR_DEPENDENCE"
        )


class LemmaHypothesisError(ParameterValidationError):
    """Exception raised when inputs violate the projection-lemma hypotheses."""

    def __init__(
        self,
        message: str,
        hypothesis: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.hypothesis = hypothesis
        details = details or {}
        if hypothesis:
            details["hypothesis"] = hypothesis
        super().__init__(message, details=details, error_code="LEMMA_HYPOTHESIS_ERROR")


class ParametrizationError(NumericalError):
    """Exception raised when the XXZ parametrization fails its round trip."""

    def __init__(
        self,
        message: str,
        mismatch: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.mismatch = mismatch
        details = details or {}
        if mismatch is not None:
            details["mismatch"] = mismatch
        super().__init__(
            message,
            operation="xxz_from_rates",
            details=details,
            error_code="PARAMETRIZATION_ERROR"
        )


# Exit code mappings for different exception types
EXIT_OK = 0
EXIT_INVALID_INPUT = 1
EXIT_RESOURCE_CAP = 2
EXIT_NUMERICAL_FAILURE = 3

EXCEPTION_EXIT_CODES = {
    ConfigurationError: EXIT_INVALID_INPUT,
    ParameterValidationError: EXIT_INVALID_INPUT,
    DimensionMismatchError: EXIT_INVALID_INPUT,
    ResourceCapError: EXIT_RESOURCE_CAP,
    NumericalError: EXIT_NUMERICAL_FAILURE,
    DualityLabException: EXIT_NUMERICAL_FAILURE,
}


def get_exit_code(exc: DualityLabException) -> int:
    """
    Get the process exit code for an exception.

    Walks the exception's class hierarchy so subclasses inherit the code
    of their closest mapped ancestor.

    Args:
        exc: The exception instance

    Returns:
        Exit code
    """
    for klass in type(exc).__mro__:
        if klass in EXCEPTION_EXIT_CODES:
            return EXCEPTION_EXIT_CODES[klass]
    return EXIT_NUMERICAL_FAILURE
