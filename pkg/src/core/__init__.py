"""
Core Module

Infrastructure shared by every part of the library:
- Configuration management
- Logging and operation timing
- Error hierarchy and error handling
- Input validation

Components:
- ConfigManager: Layered configuration (defaults, YAML/JSON file, DYNOCT_* environment)
- LoggingManager: stderr/file logging with optional JSON-line records
- ErrorHandler: Error classification, logging and statistics
- DataValidator: Rule-based validation of configuration mappings
"""

from .config_manager import (
    ConfigManager,
    AppConfig,
    OctreeSettings,
    SvgdSettings,
    KnnSettings,
    IndexSettings,
    MetricsSettings,
    BenchSettings,
    LoggingConfig,
    get_config_manager,
    load_config,
    load_mapping,
    get_config
)

from .logging_manager import (
    LoggingManager,
    PerformanceLogger,
    OperationTotals,
    StructuredFormatter,
    LogEntry,
    performance_monitor,
    get_logging_manager,
    initialize_logging,
    get_logger,
    get_performance_logger
)

from .error_handler import (
    ErrorHandler,
    ErrorContext,
    ErrorSeverity,
    ErrorCategory,
    DynamicOctreeError,
    InputError,
    ConfigurationError,
    DuplicateIdError,
    NotFoundError,
    StateError,
    DegenerateInputError,
    ConsistencyError,
    InvariantViolationError,
    get_error_handler,
    handle_error
)

from .validation_utils import (
    DataValidator,
    ValidationRule,
    ValidationResult,
    ValidatorRegistry,
    Point3,
    get_validator,
    as_point,
    as_point_array,
    require_positive,
    require_non_negative,
    validate_columns
)

__all__ = [
    # Configuration Management
    'ConfigManager',
    'AppConfig',
    'OctreeSettings',
    'SvgdSettings',
    'KnnSettings',
    'IndexSettings',
    'MetricsSettings',
    'BenchSettings',
    'LoggingConfig',
    'get_config_manager',
    'load_config',
    'load_mapping',
    'get_config',

    # Logging System
    'LoggingManager',
    'PerformanceLogger',
    'OperationTotals',
    'StructuredFormatter',
    'LogEntry',
    'performance_monitor',
    'get_logging_manager',
    'initialize_logging',
    'get_logger',
    'get_performance_logger',

    # Error Handling
    'ErrorHandler',
    'ErrorContext',
    'ErrorSeverity',
    'ErrorCategory',
    'DynamicOctreeError',
    'InputError',
    'ConfigurationError',
    'DuplicateIdError',
    'NotFoundError',
    'StateError',
    'DegenerateInputError',
    'ConsistencyError',
    'InvariantViolationError',
    'get_error_handler',
    'handle_error',

    # Validation
    'DataValidator',
    'ValidationRule',
    'ValidationResult',
    'ValidatorRegistry',
    'Point3',
    'get_validator',
    'as_point',
    'as_point_array',
    'require_positive',
    'require_non_negative',
    'validate_columns'
]
