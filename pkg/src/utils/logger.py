"""
Structured Logging Module for the SparseDVFS toolkit

Provides structured logging with optional JSON-lines output, performance
tracking and context-aware error reporting. Console output goes to stderr so
that command data written to stdout stays machine-readable.
"""
import logging
import json
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Dict, Any


# LogRecord attributes; context keys with these names would make logging raise
_RESERVED_KEYS = frozenset([
    'name', 'msg', 'args', 'created', 'filename', 'funcName', 'levelname',
    'levelno', 'lineno', 'module', 'msecs', 'message', 'pathname', 'process',
    'processName', 'relativeCreated', 'thread', 'threadName', 'exc_info',
    'exc_text', 'stack_info', 'taskName',
])

_console_level = logging.INFO


class StructuredLogger:
    """
    Structured logger that attaches keyword context to every record.

    Features:
    - Human-readable console output on stderr
    - Optional JSON-lines file output (one object per record)
    - Domain helpers for partition, simulation and throttle events
    """

    def __init__(self, name: str, log_file: Optional[Path] = None,
                 console_output: bool = True, json_output: bool = False):
        """
        Initialize structured logger

        Args:
            name: Logger name (usually module name)
            log_file: Optional file path for log output
            console_output: Enable console logging
            json_output: Output console logs in JSON format (vs human-readable)
        """
        self.name = name
        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        self.json_output = json_output

        # Remove existing handlers to avoid duplicates
        self.logger.handlers.clear()

        if console_output:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setLevel(_console_level)

            if json_output:
                console_handler.setFormatter(JsonFormatter())
            else:
                console_handler.setFormatter(logging.Formatter(
                    '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                    datefmt='%Y-%m-%d %H:%M:%S'
                ))

            self.logger.addHandler(console_handler)

        if log_file:
            self.add_file(log_file)

    def add_file(self, log_file: Path):
        """Attach a JSON-lines file handler receiving every level"""
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(JsonFormatter())
        self.logger.addHandler(file_handler)

    def _log(self, level: str, message: str, **context):
        """
        Internal logging method with context

        Args:
            level: Log level
            message: Log message
            **context: Additional context fields
        """
        extra = {(f"ctx_{k}" if k in _RESERVED_KEYS else k): v
                 for k, v in context.items()}
        getattr(self.logger, level.lower())(message, extra=extra)

    def debug(self, message: str, **context):
        """Log debug message"""
        self._log("DEBUG", message, **context)

    def info(self, message: str, **context):
        """Log info message"""
        self._log("INFO", message, **context)

    def warning(self, message: str, **context):
        """Log warning message"""
        self._log("WARNING", message, **context)

    def error(self, message: str, **context):
        """Log error message"""
        self._log("ERROR", message, **context)

    # Specialized logging methods for the DVFS toolkit

    def log_partition(self, graph: str, operators: int, blocks: int,
                      n_factor: float, switching_s: float):
        """Log a completed partition"""
        self.info(
            f"Partitioned {graph}: {operators} ops -> {blocks} blocks",
            event="partition_completed",
            graph=graph,
            operators=operators,
            blocks=blocks,
            n_factor=n_factor,
            switching_ms=switching_s * 1000.0
        )

    def log_simulation(self, policy: str, graph: str, makespan_s: float,
                       energy_j: float, stall_s: float, **extra):
        """Log a completed simulated run"""
        self.info(
            f"Run {policy} on {graph}: {makespan_s * 1000.0:.2f}ms, "
            f"{energy_j:.4f}J",
            event="simulation_completed",
            policy=policy,
            graph=graph,
            makespan_ms=makespan_s * 1000.0,
            energy_j=energy_j,
            stall_ms=stall_s * 1000.0,
            **extra
        )

    def log_throttle(self, temp: float, limit: float, t: float, engaged: bool):
        """Log a throttle state change"""
        self.warning(
            f"Thermal throttle {'engaged' if engaged else 'released'} "
            f"at {temp:.1f}C (limit {limit:.1f}C)",
            event="throttle_engaged" if engaged else "throttle_released",
            temp=temp,
            limit=limit,
            sim_time_s=t
        )

    def log_performance(self, operation: str, duration_ms: float,
                        success: bool = True, **metrics):
        """Log performance metrics"""
        self.info(
            f"Performance: {operation} took {duration_ms:.2f}ms",
            event="performance_metric",
            operation=operation,
            duration_ms=duration_ms,
            success=success,
            **metrics
        )

    def log_error_with_context(self, error: Exception, context: str,
                               **additional_context):
        """Log error with rich context"""
        self.error(
            f"Error in {context}: {str(error)}",
            event="error_occurred",
            error_type=type(error).__name__,
            error_message=str(error),
            context=context,
            **additional_context
        )


class JsonFormatter(logging.Formatter):
    """Custom JSON formatter for structured logging"""

    _STANDARD = _RESERVED_KEYS | {'exc_info', 'exc_text'}

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON"""
        log_data: Dict[str, Any] = {
            "timestamp": datetime.fromtimestamp(record.created).isoformat(),
            "logger": record.name,
            "level": record.levelname,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno
        }

        for key, value in record.__dict__.items():
            if key not in self._STANDARD:
                log_data[key] = value

        return json.dumps(log_data, default=str)


# Global logger factory
_loggers: Dict[str, StructuredLogger] = {}


def get_logger(name: str, log_file: Optional[Path] = None,
               console_output: bool = True,
               json_output: bool = False) -> StructuredLogger:
    """
    Get or create a structured logger

    Args:
        name: Logger name
        log_file: Optional log file path
        console_output: Enable console output
        json_output: Use JSON format

    Returns:
        StructuredLogger instance
    """
    if name not in _loggers:
        _loggers[name] = StructuredLogger(
            name=name,
            log_file=log_file,
            console_output=console_output,
            json_output=json_output
        )

    return _loggers[name]


def set_console_level(level: int):
    """Change the console threshold of every logger created so far (and later)"""
    global _console_level
    _console_level = level
    for structured in _loggers.values():
        for handler in structured.logger.handlers:
            if not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)


def setup_app_logging(log_dir: Optional[Path] = None,
                      json_output: bool = False) -> StructuredLogger:
    """
    Setup application-wide logging

    Every module logger also gets the per-day file handler, so a run's whole
    history lands in one JSON-lines file.

    Args:
        log_dir: Directory for log files
        json_output: Use JSON format on the console

    Returns:
        Main application logger
    """
    app_logger = get_logger(name="sparse_dvfs", json_output=json_output)

    if log_dir:
        log_file = Path(log_dir) / f"sparse_dvfs_{datetime.now().strftime('%Y%m%d')}.log"
        for structured in _loggers.values():
            if not any(isinstance(h, logging.FileHandler)
                       for h in structured.logger.handlers):
                structured.add_file(log_file)

    return app_logger
