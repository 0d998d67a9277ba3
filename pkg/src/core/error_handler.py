"""
Error Handling Framework

Exception hierarchy and error bookkeeping for the dynamic octree library.
Every error raised by the library derives from DynamicOctreeError and
carries a severity, a category and a details dictionary so the command
line layer can log it and map it to an exit code.
"""

import itertools
import logging
import traceback
from typing import Dict, Any, Optional, List
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum


class ErrorSeverity(Enum):
    """Error severity levels"""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """Error categories for classification"""
    INPUT = "input"
    CONFIGURATION = "configuration"
    LOOKUP = "lookup"
    STATE = "state"
    CONSISTENCY = "consistency"
    INVARIANT = "invariant"
    SYSTEM = "system"


# Categories the CLI reports as caller mistakes (exit code 1); everything
# else is treated as an internal failure (exit code 2).
USER_ERROR_CATEGORIES = frozenset({
    ErrorCategory.INPUT,
    ErrorCategory.CONFIGURATION,
    ErrorCategory.LOOKUP,
    ErrorCategory.STATE,
})

_error_counter = itertools.count(1)


@dataclass
class ErrorContext:
    """Context information for errors"""
    timestamp: datetime
    error_id: str
    severity: ErrorSeverity
    category: ErrorCategory
    message: str
    details: Dict[str, Any]
    stack_trace: Optional[str] = None
    recovery_suggestions: List[str] = field(default_factory=list)

    @property
    def is_user_error(self) -> bool:
        return self.category in USER_ERROR_CATEGORIES


class DynamicOctreeError(Exception):
    """Base exception for the dynamic octree library"""

    default_severity = ErrorSeverity.MEDIUM
    default_category = ErrorCategory.SYSTEM

    def __init__(self, message: str, severity: Optional[ErrorSeverity] = None,
                 category: Optional[ErrorCategory] = None,
                 details: Optional[Dict[str, Any]] = None,
                 recovery_suggestions: Optional[List[str]] = None):
        super().__init__(message)
        self.severity = severity or self.default_severity
        self.category = category or self.default_category
        self.details = details or {}
        self.recovery_suggestions = recovery_suggestions or []
        self.error_id = self._generate_error_id()
        self.timestamp = datetime.now()

    def _generate_error_id(self) -> str:
        """Generate unique error ID"""
        return f"DYNOCT_{self.category.value.upper()}_{next(_error_counter):06d}"

    def to_context(self) -> ErrorContext:
        """Convert to ErrorContext"""
        return ErrorContext(
            timestamp=self.timestamp,
            error_id=self.error_id,
            severity=self.severity,
            category=self.category,
            message=str(self),
            details=dict(self.details),
            stack_trace=traceback.format_exc(),
            recovery_suggestions=list(self.recovery_suggestions)
        )


class InputError(DynamicOctreeError):
    """Malformed or out-of-range input (negative radius, NaN coordinate, bad CSV)"""

    default_category = ErrorCategory.INPUT

    def __init__(self, message: str, field_name: str = None, field_value: Any = None, **kwargs):
        details = kwargs.pop('details', None) or {}
        if field_name:
            details['field_name'] = field_name
        if field_value is not None:
            details['field_value'] = str(field_value)
        super().__init__(message, details=details, **kwargs)


class ConfigurationError(DynamicOctreeError):
    """Invalid configuration values"""

    default_severity = ErrorSeverity.HIGH
    default_category = ErrorCategory.CONFIGURATION

    def __init__(self, message: str, config_key: str = None, config_value: Any = None, **kwargs):
        details = kwargs.pop('details', None) or {}
        if config_key:
            details['config_key'] = config_key
        if config_value is not None:
            details['config_value'] = str(config_value)
        super().__init__(message, details=details, **kwargs)


class DuplicateIdError(InputError):
    """A point id that is already live was inserted again"""

    def __init__(self, point_id: int, **kwargs):
        super().__init__(f"Point id {point_id} is already present", field_name='id',
                         field_value=point_id, **kwargs)
        self.point_id = point_id


class NotFoundError(DynamicOctreeError):
    """A point id is not live in the structure"""

    default_category = ErrorCategory.LOOKUP

    def __init__(self, point_id: int, **kwargs):
        details = kwargs.pop('details', None) or {}
        details['id'] = point_id
        super().__init__(f"Point id {point_id} not found", details=details, **kwargs)
        self.point_id = point_id


class StateError(DynamicOctreeError):
    """Operation not valid in the object's current state"""

    default_category = ErrorCategory.STATE


class DegenerateInputError(InputError):
    """Input is well-formed but geometrically degenerate"""

    def __init__(self, message: str, point_index: Optional[int] = None, **kwargs):
        details = kwargs.pop('details', None) or {}
        if point_index is not None:
            details['point_index'] = point_index
        super().__init__(message, details=details, **kwargs)
        self.point_index = point_index


class ConsistencyError(DynamicOctreeError):
    """Two structures that must agree do not (octree vs particle ensemble)"""

    default_severity = ErrorSeverity.HIGH
    default_category = ErrorCategory.CONSISTENCY


class InvariantViolationError(DynamicOctreeError):
    """An internal structural invariant was found broken"""

    default_severity = ErrorSeverity.CRITICAL
    default_category = ErrorCategory.INVARIANT

    def __init__(self, message: str, violations: Optional[List[str]] = None, **kwargs):
        details = kwargs.pop('details', None) or {}
        if violations:
            details['violations'] = list(violations)
        super().__init__(message, details=details, **kwargs)
        self.violations = list(violations or [])


# foreign exception types, most specific first
_FOREIGN_CATEGORIES = (
    ((ValueError, TypeError, FileNotFoundError, PermissionError, IsADirectoryError), ErrorCategory.INPUT),
    ((KeyError,), ErrorCategory.LOOKUP),
)

_SEVERITY_LEVELS = {
    ErrorSeverity.CRITICAL: logging.CRITICAL,
    ErrorSeverity.HIGH: logging.ERROR,
    ErrorSeverity.MEDIUM: logging.WARNING,
    ErrorSeverity.LOW: logging.INFO,
}

_HINTS = {
    ErrorCategory.INPUT: "Check file paths, CSV headers and numeric ranges",
    ErrorCategory.CONFIGURATION: "Check K >= 1, alpha >= 1, max_depth >= 1, expansion_factor > 1",
}


def classify(error: BaseException) -> ErrorCategory:
    """Category of an exception raised outside the library"""
    for types, category in _FOREIGN_CATEGORIES:
        if isinstance(error, types):
            return category
    return ErrorCategory.SYSTEM


def severity_for(category: ErrorCategory) -> ErrorSeverity:
    if category in (ErrorCategory.INVARIANT, ErrorCategory.SYSTEM):
        return ErrorSeverity.CRITICAL
    if category in (ErrorCategory.CONFIGURATION, ErrorCategory.CONSISTENCY):
        return ErrorSeverity.HIGH
    return ErrorSeverity.MEDIUM


class ErrorHandler:
    """
    Turns exceptions into ErrorContext records and logs them at a level
    matching their severity.

    Library errors carry their own category; foreign exceptions are
    classified by type.
    """

    def __init__(self, logger: Optional[logging.Logger] = None):
        self.logger = logger or logging.getLogger(__name__)

    def handle_error(self, error: BaseException, context: Optional[Dict[str, Any]] = None) -> ErrorContext:
        try:
            error_context = self._to_context(error)
            error_context.details.update(context or {})
        except Exception as handler_error:
            self.logger.critical(f"Error handler failed: {handler_error}")
            return ErrorContext(
                timestamp=datetime.now(),
                error_id=f"DYNOCT_FALLBACK_{next(_error_counter):06d}",
                severity=ErrorSeverity.CRITICAL,
                category=ErrorCategory.SYSTEM,
                message=f"Error handler failed: {handler_error}. Original error: {error}",
                details={'original_error': str(error), 'handler_error': str(handler_error)}
            )

        self.logger.log(_SEVERITY_LEVELS[error_context.severity], error_context.message,
                        extra={'extra_data': {'error_id': error_context.error_id,
                                              'severity': error_context.severity.value,
                                              'category': error_context.category.value,
                                              'details': error_context.details}})
        return error_context

    def _to_context(self, error: BaseException) -> ErrorContext:
        if isinstance(error, MemoryError):
            return self._out_of_memory(error)
        if isinstance(error, DynamicOctreeError):
            return error.to_context()

        category = classify(error)
        hint = _HINTS.get(category, "Re-run with --log-level DEBUG and report the error id")
        return ErrorContext(
            timestamp=datetime.now(),
            error_id=f"DYNOCT_{type(error).__name__.upper()}_{next(_error_counter):06d}",
            severity=severity_for(category),
            category=category,
            message=str(error) or type(error).__name__,
            details={'error_type': type(error).__name__},
            stack_trace=traceback.format_exc(),
            recovery_suggestions=[hint]
        )

    @staticmethod
    def _out_of_memory(error: BaseException) -> ErrorContext:
        return ErrorContext(
            timestamp=datetime.now(),
            error_id=f"DYNOCT_MEMORY_{next(_error_counter):06d}",
            severity=ErrorSeverity.CRITICAL,
            category=ErrorCategory.SYSTEM,
            message=str(error) or "out of memory",
            details={'error_type': 'MemoryError'},
            recovery_suggestions=["Reduce --scale or the point count"]
        )


_error_handler: Optional[ErrorHandler] = None


def get_error_handler() -> ErrorHandler:
    global _error_handler
    if _error_handler is None:
        _error_handler = ErrorHandler()
    return _error_handler


def handle_error(error: BaseException, context: Optional[Dict[str, Any]] = None) -> ErrorContext:
    """Handle an error with the global handler"""
    return get_error_handler().handle_error(error, context)
