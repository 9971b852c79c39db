"""
Custom Exception Classes
Error hierarchy of the uniformization engine, one family per subsystem.
"""

from typing import Optional, Any, Dict


class ApplicationError(Exception):
    """Base exception class for all engine errors."""

    def __init__(self, message: str, error_code: Optional[str] = None, details: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}

    def __str__(self):
        return f"[{self.error_code}] {self.message}"

    def to_dict(self) -> dict:
        """Convert exception to dictionary for logging/serialization."""
        return {
            "error_type": self.__class__.__name__,
            "error_code": self.error_code,
            "message": self.message,
            "details": self.details
        }


# Value group

class ValueGroupError(ApplicationError):
    """Base class for value-group arithmetic errors."""

    def __init__(self, message: str, operation: Optional[str] = None, details: Optional[dict] = None):
        details = dict(details or {})
        if operation:
            details["operation"] = operation
        super().__init__(message, "VALUE_ERROR", details)


class BasisMismatch(ValueGroupError):
    """Raised when two values over different weight bases are combined."""

    def __init__(self, message: str = "Values belong to different weight bases"):
        super().__init__(message, operation="compare")


class NotInRationalSpan(ValueGroupError):
    """Raised when a value is not a rational combination of the independent values."""

    def __init__(self, value: Any, message: Optional[str] = None):
        if message is None:
            message = f"Value {value} is not in the rational span of the independent values"
        super().__init__(message, operation="solve_contact", details={"value": str(value)})


class ResidueNotRational(ValueGroupError):
    """Raised when a residue or root would leave the rationals."""

    def __init__(self, message: str, residue: Any = None):
        details = {}
        if residue is not None:
            details["residue"] = str(residue)
        super().__init__(message, operation="residue", details=details)


# Series

class SeriesError(ApplicationError):
    """Base class for truncated series errors."""

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "SERIES_ERROR", details)


class VariableMismatch(SeriesError):
    """Raised when series over different variable lists are combined."""

    def __init__(self, left: Any, right: Any):
        super().__init__(
            f"Variable lists differ: {left} vs {right}",
            {"left": str(left), "right": str(right)},
        )


class NotAUnit(SeriesError):
    """Raised when inverting a series whose constant term vanishes."""

    def __init__(self, series: Any):
        super().__init__(f"Series is not a unit: {series}", {"series": str(series)})


class NegativeExponent(SeriesError):
    """Raised when a substitution pushes an exponent out of its legal range."""

    def __init__(self, message: str, exponent: Any = None):
        details = {}
        if exponent is not None:
            details["exponent"] = str(exponent)
        super().__init__(message, details)


class ParseError(SeriesError):
    """Raised when a polynomial, value or problem-file fragment cannot be parsed."""

    def __init__(self, text: str, reason: str):
        super().__init__(f"Cannot parse '{text}': {reason}", {"text": text})


# Precision

class PrecisionError(ApplicationError):
    """Base class for precision exhaustion."""

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "PRECISION_ERROR", details)


class InsufficientPrecision(PrecisionError):
    """Raised when a leading term cannot be certified below the precision bound."""

    def __init__(self, message: str = "Precision bound reached before a nonzero term", bound: Any = None):
        details = {}
        if bound is not None:
            details["bound"] = str(bound)
        super().__init__(message, details)


class ZeroUpToPrecision(PrecisionError):
    """Raised when an element evaluates to exactly zero along the arc."""

    def __init__(self, message: str = "Element is zero along the arc"):
        super().__init__(message)


class PrecisionExhausted(PrecisionError):
    """Raised when a transform consumes all remaining precision."""

    def __init__(self, message: str, operation: Optional[str] = None):
        details = {}
        if operation:
            details["operation"] = operation
        super().__init__(message, details)


# Models

class ModelError(ApplicationError):
    """Base class for local model transformation errors."""

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "MODEL_ERROR", details)


class NotValueZero(ModelError):
    """Raised when a residue is requested for an element of positive value."""

    def __init__(self, value: Any):
        super().__init__(f"Element has value {value}, expected zero", {"value": str(value)})


class ValueConstraintViolated(ModelError):
    """Raised when a coordinate change would decrease the value of a dependent variable."""

    def __init__(self, variable: str, before: Any, after: Any):
        super().__init__(
            f"Coordinate change lowers the value of {variable}: {before} -> {after}",
            {"variable": variable, "before": str(before), "after": str(after)},
        )


class NoDependentVariables(ModelError):
    """Raised when a dependent-variable operation is requested on a model with r = n."""

    def __init__(self, message: str = "Model has no dependent variables"):
        super().__init__(message)


class EqualValuesOnIndependents(ModelError):
    """Raised when two independent variables report equal values."""

    def __init__(self, first: str, second: str):
        super().__init__(
            f"Independent variables {first} and {second} have equal values",
            {"first": first, "second": second},
        )


class StepBudgetExceeded(ModelError):
    """Raised when a Puiseux package does not finish within its step budget."""

    def __init__(self, variable: str, budget: int):
        super().__init__(
            f"Puiseux package on {variable} exceeded {budget} steps",
            {"variable": variable, "budget": budget},
        )


# Vector fields

class FieldError(ApplicationError):
    """Base class for vector field errors."""

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "FIELD_ERROR", details)


class ZeroField(FieldError):
    """Raised when normalizing the zero vector field."""

    def __init__(self, message: str = "Vector field is zero up to precision"):
        super().__init__(message)


class MaximalContactDetected(FieldError):
    """Raised inside an engine when the arc lies on an invariant hypersurface."""

    def __init__(self, variable: str, message: Optional[str] = None):
        if message is None:
            message = f"Coordinate {variable} has infinite value along the arc"
        super().__init__(message, {"variable": variable})


# Polyhedra

class PolyhedronError(ApplicationError):
    """Base class for Newton polyhedron and game errors."""

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "POLYHEDRON_ERROR", details)


class EmptySupport(PolyhedronError):
    """Raised when a polyhedron is requested for an empty support."""

    def __init__(self, message: str = "Support is empty"):
        super().__init__(message)


class SingleVertex(PolyhedronError):
    """Raised when a game step is requested on a single-vertex polyhedron."""

    def __init__(self, vertex: Any):
        super().__init__(f"Polyhedron has a single vertex {vertex}", {"vertex": str(vertex)})


class BudgetExceeded(PolyhedronError):
    """Raised when an iterative reduction does not finish within its budget."""

    def __init__(self, phase: str, budget: int, history: Optional[list] = None):
        details: Dict[str, Any] = {"phase": phase, "budget": budget}
        if history is not None:
            details["history"] = [str(entry) for entry in history]
        super().__init__(f"{phase} exceeded budget of {budget} steps", details)
        self.history = history or []


# Invariants

class InvariantViolation(ApplicationError):
    """Raised when a runtime-checked monotonicity or identity fails."""

    def __init__(self, message: str, invariant: Optional[str] = None, witness: Optional[dict] = None):
        details: Dict[str, Any] = {}
        if invariant:
            details["invariant"] = invariant
        if witness:
            details["witness"] = {k: str(v) for k, v in witness.items()}
        super().__init__(message, "INVARIANT_VIOLATION", details)
        self.witness = witness or {}


class DivisibilityViolation(InvariantViolation):
    """Raised when the initial-form level spacing contradicts the contact exponents."""

    def __init__(self, level: int, chi: int, d: int):
        super().__init__(
            f"Level {level} does not sit on the critical segment of height {chi} with spacing {d}",
            invariant="initial_form_spacing",
            witness={"level": level, "chi": chi, "d": d},
        )


class ShapeViolation(InvariantViolation):
    """Raised when a field does not have the level shapes a step requires."""

    def __init__(self, message: str, witness: Optional[dict] = None):
        super().__init__(message, invariant="level_shape", witness=witness)


# Problems and input

class ProblemFileError(ApplicationError):
    """Raised when a problem or trace file is malformed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        details: Dict[str, Any] = {}
        if path:
            details["path"] = path
        if line is not None:
            details["line"] = line
        super().__init__(message, "PROBLEM_ERROR", details)


class ValidationError(ApplicationError):
    """Raised when input validation fails."""

    def __init__(self, message: str, field_name: Optional[str] = None, field_value: Any = None):
        details = {}
        if field_name:
            details["field_name"] = field_name
        if field_value is not None:
            details["field_value"] = str(field_value)

        super().__init__(message, "VALIDATION_ERROR", details)
