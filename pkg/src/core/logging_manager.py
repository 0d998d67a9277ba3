"""
Logging System

Root logger setup for the library and the command line. Console output
always goes to stderr because stdout carries CSV. Records can be rendered
as JSON lines, and long-running operations (octree builds, SVGD runs,
index builds, bench runs) are timed through PerformanceLogger.
"""

import functools
import itertools
import json
import logging
import logging.handlers
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Union

DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass
class LogEntry:
    """One JSON log line"""
    timestamp: str
    level: str
    logger: str
    message: str
    location: str
    extra_data: Dict[str, Any] = field(default_factory=dict)
    exception: Optional[str] = None


class StructuredFormatter(logging.Formatter):
    """Renders each record as one JSON object; structured fields ride in `extra_data`"""

    def format(self, record: logging.LogRecord) -> str:
        try:
            entry = LogEntry(
                timestamp=datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
                level=record.levelname,
                logger=record.name,
                message=record.getMessage(),
                location=f"{record.module}:{record.funcName}:{record.lineno}",
                extra_data=getattr(record, 'extra_data', {}),
                exception=self.formatException(record.exc_info) if record.exc_info else None
            )
            return json.dumps(asdict(entry), default=str)
        except Exception:
            return super().format(record)


@dataclass
class OperationTotals:
    """Accumulated durations of one operation type"""
    count: int = 0
    failures: int = 0
    total_seconds: float = 0.0
    max_seconds: float = 0.0

    def add(self, seconds: float, success: bool) -> None:
        self.count += 1
        self.failures += 0 if success else 1
        self.total_seconds += seconds
        self.max_seconds = max(self.max_seconds, seconds)


class PerformanceLogger:
    """
    Times named operations and keeps per-type totals.

    `start` returns an operation id that `end` closes. Durations are logged
    at INFO on success and ERROR on failure, with the start details and the
    result fields attached as `extra_data`.
    """

    _ids = itertools.count(1)

    def __init__(self, logger: logging.Logger):
        self.logger = logger
        self._active: Dict[str, Dict[str, Any]] = {}
        self.totals: Dict[str, OperationTotals] = {}

    def start(self, operation_type: str, **details) -> str:
        operation_id = f"{operation_type}#{next(self._ids)}"
        self._active[operation_id] = {'type': operation_type, 'started': time.perf_counter(),
                                      'details': details}
        self.logger.debug(f"Operation started: {operation_type}",
                          extra={'extra_data': {'operation_id': operation_id, **details}})
        return operation_id

    def end(self, operation_id: str, success: bool = True, error: Optional[BaseException] = None,
            **result) -> Optional[float]:
        """Close an operation; returns its duration in seconds, None if it was never started"""
        operation = self._active.pop(operation_id, None)
        if operation is None:
            self.logger.warning(f"Operation end logged without start: {operation_id}")
            return None
        duration = time.perf_counter() - operation['started']
        op_type = operation['type']
        self.totals.setdefault(op_type, OperationTotals()).add(duration, success)

        data = {'operation_id': operation_id, 'duration_seconds': round(duration, 6),
                'success': success, 'details': operation['details'], 'result': result}
        if success:
            self.logger.info(f"Operation completed: {op_type} ({duration:.3f}s)", extra={'extra_data': data})
        else:
            if error is not None:
                data['error_type'] = type(error).__name__
                data['error_message'] = str(error)
            self.logger.error(f"Operation failed: {op_type} ({duration:.3f}s)", extra={'extra_data': data})
        return duration

    @property
    def active(self) -> int:
        return len(self._active)


_perf_loggers: Dict[str, PerformanceLogger] = {}


def get_performance_logger(name: str) -> PerformanceLogger:
    """Shared PerformanceLogger for a logger name, so totals accumulate across calls"""
    if name not in _perf_loggers:
        _perf_loggers[name] = PerformanceLogger(logging.getLogger(name))
    return _perf_loggers[name]


def performance_monitor(operation_type: Optional[str] = None, logger_name: Optional[str] = None):
    """Decorator timing every call of the wrapped function"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            perf = get_performance_logger(logger_name or func.__module__)
            op_id = perf.start(operation_type or f"{func.__module__}.{func.__name__}",
                               function=func.__name__)
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                perf.end(op_id, success=False, error=e)
                raise
            perf.end(op_id, result_type=type(result).__name__)
            return result
        return wrapper
    return decorator


class LoggingManager:
    """
    Configures the root logger.

    Accepts the `logging` section of the application config as a mapping;
    missing keys fall back to `default_config`.
    """

    default_config: Dict[str, Any] = {
        'level': 'WARNING',
        'format': DEFAULT_FORMAT,
        'file_enabled': False,
        'file_path': 'logs/dynoct.log',
        'file_max_size_mb': 10,
        'file_backup_count': 5,
        'console_enabled': True,
        'structured_logging': False
    }

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = {**self.default_config, **(config or {})}
        self._initialized = False

    def _formatter(self) -> logging.Formatter:
        if self.config['structured_logging']:
            return StructuredFormatter()
        return logging.Formatter(self.config['format'])

    def _file_handler(self) -> logging.Handler:
        log_file = Path(self.config['file_path'])
        log_file.parent.mkdir(parents=True, exist_ok=True)
        return logging.handlers.RotatingFileHandler(
            filename=str(log_file),
            maxBytes=int(self.config['file_max_size_mb']) * 1024 * 1024,
            backupCount=int(self.config['file_backup_count']),
            encoding='utf-8'
        )

    def initialize(self) -> bool:
        """Replace the root handlers; False (with a note on stderr) if setup fails"""
        try:
            level = getattr(logging, str(self.config['level']).upper())
            handlers = []
            if self.config['console_enabled']:
                handlers.append(logging.StreamHandler(sys.stderr))
            if self.config['file_enabled']:
                handlers.append(self._file_handler())

            root = logging.getLogger()
            root.handlers.clear()
            root.setLevel(level)
            formatter = self._formatter()
            for handler in handlers:
                handler.setFormatter(formatter)
                handler.setLevel(level)
                root.addHandler(handler)

            self._initialized = True
            logging.getLogger(__name__).debug(f"Logging initialized: {self.config}")
            return True
        except Exception as e:
            sys.stderr.write(f"Failed to initialize logging system: {e}\n")
            return False

    @staticmethod
    def get_logger(name: str) -> logging.Logger:
        return logging.getLogger(name)

    def set_level(self, level: Union[str, int], logger_name: Optional[str] = None) -> None:
        """Set the level of one logger, or of the root logger and its handlers"""
        if isinstance(level, str):
            level = getattr(logging, level.upper())
        if logger_name:
            logging.getLogger(logger_name).setLevel(level)
            return
        root = logging.getLogger()
        root.setLevel(level)
        for handler in root.handlers:
            handler.setLevel(level)

    def log_application_start(self, version: str, run_summary: Dict[str, Any]) -> None:
        logging.getLogger('dynoct').info(
            f"dynoct {version} started",
            extra={'extra_data': {'event': 'start', 'version': version, **run_summary}}
        )

    def log_application_stop(self, version: str, exit_code: int) -> None:
        logging.getLogger('dynoct').info(
            f"dynoct {version} finished with exit code {exit_code}",
            extra={'extra_data': {'event': 'stop', 'version': version, 'exit_code': exit_code}}
        )


_logging_manager: Optional[LoggingManager] = None


def get_logging_manager() -> LoggingManager:
    global _logging_manager
    if _logging_manager is None:
        _logging_manager = LoggingManager()
    return _logging_manager


def initialize_logging(config: Optional[Dict[str, Any]] = None) -> bool:
    """Install a fresh global LoggingManager and configure the root logger"""
    global _logging_manager
    _logging_manager = LoggingManager(config)
    return _logging_manager.initialize()


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
