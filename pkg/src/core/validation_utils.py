"""
Validation Utilities

Input validation helpers shared by every module: coercion of coordinates
to finite 3-tuples, numeric range checks, rule-based validation of
configuration dictionaries and column checks for CSV input.
"""

import math
from typing import Dict, Any, List, Optional, Callable, Iterable, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np

from .error_handler import InputError, ErrorSeverity

Point3 = Tuple[float, float, float]


@dataclass
class ValidationRule:
    """Validation rule definition"""
    name: str
    validator: Callable[[Any], bool]
    error_message: str
    severity: ErrorSeverity = ErrorSeverity.MEDIUM


@dataclass
class ValidationResult:
    """Result of validation operation"""
    is_valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    field_errors: Dict[str, List[str]] = field(default_factory=dict)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool)


class ValidatorRegistry:
    """Registry for validation rules"""

    def __init__(self):
        self._validators: Dict[str, ValidationRule] = {}
        self._register_built_in_validators()

    def register_validator(self, name: str, validator: ValidationRule):
        """Register a validation rule"""
        self._validators[name] = validator

    def get_validator(self, name: str) -> Optional[ValidationRule]:
        """Get validator by name"""
        return self._validators.get(name)

    def _register_built_in_validators(self):
        """Register built-in validation rules"""

        self.register_validator('required', ValidationRule(
            name='required',
            validator=lambda x: x is not None,
            error_message='This field is required'
        ))

        self.register_validator('number', ValidationRule(
            name='number',
            validator=lambda x: x is None or _is_number(x),
            error_message='Value must be a number'
        ))

        self.register_validator('integer', ValidationRule(
            name='integer',
            validator=lambda x: x is None or (_is_number(x) and float(x).is_integer()),
            error_message='Value must be an integer'
        ))

        self.register_validator('finite', ValidationRule(
            name='finite',
            validator=lambda x: x is None or (_is_number(x) and math.isfinite(float(x))),
            error_message='Value must be finite'
        ))

        self.register_validator('positive', ValidationRule(
            name='positive',
            validator=lambda x: x is None or (_is_number(x) and float(x) > 0),
            error_message='Value must be positive'
        ))

        self.register_validator('non_negative', ValidationRule(
            name='non_negative',
            validator=lambda x: x is None or (_is_number(x) and float(x) >= 0),
            error_message='Value must be non-negative'
        ))

        self.register_validator('at_least_one', ValidationRule(
            name='at_least_one',
            validator=lambda x: x is None or (_is_number(x) and float(x) >= 1),
            error_message='Value must be at least 1'
        ))

        self.register_validator('greater_than_one', ValidationRule(
            name='greater_than_one',
            validator=lambda x: x is None or (_is_number(x) and float(x) > 1),
            error_message='Value must be greater than 1'
        ))


class DataValidator:
    """
    Rule-based validation of dictionaries.

    Schemas map a field name to the list of rule names it must satisfy.
    """

    def __init__(self, registry: Optional[ValidatorRegistry] = None):
        """
        Initialize data validator.

        Args:
            registry: Custom validator registry (optional)
        """
        self.registry = registry or ValidatorRegistry()

    def validate_dict(self, data: Dict[str, Any],
                      schema: Dict[str, List[str]],
                      allow_unknown: bool = True) -> ValidationResult:
        """
        Validate dictionary against schema.

        Args:
            data: Data to validate
            schema: Validation schema {field_name: [validator_names]}
            allow_unknown: If False, keys absent from the schema are errors

        Returns:
            ValidationResult with validation details
        """
        result = ValidationResult(is_valid=True)

        for field_name, validator_names in schema.items():
            field_value = data.get(field_name)
            field_errors = []

            for validator_name in validator_names:
                validator = self.registry.get_validator(validator_name)
                if not validator:
                    result.warnings.append(f"Unknown validator: {validator_name}")
                    continue
                if not validator.validator(field_value):
                    field_errors.append(validator.error_message)

            if field_errors:
                result.field_errors[field_name] = field_errors
                result.errors.extend([f"{field_name}: {error}" for error in field_errors])
                result.is_valid = False

        if not allow_unknown:
            for key in data:
                if key not in schema:
                    result.errors.append(f"{key}: Unknown field")
                    result.field_errors.setdefault(key, []).append('Unknown field')
                    result.is_valid = False

        return result


def as_point(pos: Sequence[float], name: str = "pos") -> Point3:
    """
    Coerce a 3-vector to a tuple of Python floats.

    Raises:
        InputError: wrong length or non-finite coordinate
    """
    try:
        x, y, z = (float(c) for c in pos)
    except (TypeError, ValueError):
        raise InputError(f"{name} must be a 3-vector of numbers", field_name=name, field_value=pos)
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise InputError(f"{name} has a non-finite coordinate", field_name=name, field_value=pos)
    return (x, y, z)


def as_point_array(points: Any, name: str = "points") -> np.ndarray:
    """Coerce an (n, 3) array-like to a finite float64 array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InputError(f"{name} must have shape (n, 3)", field_name=name, field_value=arr.shape)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite coordinates", field_name=name)
    return arr


def require_positive(value: float, name: str) -> float:
    """Return value if strictly positive, else raise InputError"""
    if not _is_number(value) or not math.isfinite(float(value)) or float(value) <= 0:
        raise InputError(f"{name} must be positive", field_name=name, field_value=value)
    return value


def require_non_negative(value: float, name: str) -> float:
    """Return value if >= 0, else raise InputError"""
    if not _is_number(value) or not math.isfinite(float(value)) or float(value) < 0:
        raise InputError(f"{name} must be non-negative", field_name=name, field_value=value)
    return value


def validate_columns(columns: Iterable[str], expected: Sequence[str], source: str = "input") -> None:
    """
    Check a CSV header.

    Raises:
        InputError: the header does not list exactly the expected columns in order
    """
    actual = [str(c).strip() for c in columns]
    if actual != list(expected):
        raise InputError(
            f"{source}: expected columns {','.join(expected)}, got {','.join(actual)}",
            field_name='columns', field_value=actual
        )


# Global validator instance
_validator: Optional[DataValidator] = None


def get_validator() -> DataValidator:
    """Get global validator instance"""
    global _validator
    if _validator is None:
        _validator = DataValidator()
    return _validator
