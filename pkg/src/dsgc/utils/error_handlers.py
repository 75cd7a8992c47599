"""
Error Handling Module

Standardized error types for the graph-convolution engine. Every error carries
a stable error code, a category, structured metadata and the process exit code
the CLI reports when the error escapes a command.
"""

import json
import sys
import traceback
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import wraps
from typing import Any, Callable, Dict, Optional, Sequence, TypeVar

import typer

from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


class ErrorSeverity(Enum):
    """Error severity levels for classification and routing."""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class ErrorCategory(Enum):
    """Categorization of error types."""
    DIMENSION = "DIMENSION"
    STRUCTURE = "STRUCTURE"
    BOUNDS = "BOUNDS"
    CONTRACT = "CONTRACT"
    PARAMETER = "PARAMETER"
    CONFIGURATION = "CONFIGURATION"
    DATASET = "DATASET"
    NUMERICAL = "NUMERICAL"
    UNKNOWN = "UNKNOWN"


@dataclass
class StructuredError:
    """Standardized error structure for consistent error reporting."""
    error_code: str
    message: str
    severity: ErrorSeverity
    category: ErrorCategory
    exit_code: int = 1
    metadata: Dict[str, Any] = field(default_factory=dict)
    stack_trace: Optional[str] = None
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def to_dict(self) -> Dict[str, Any]:
        """Convert structured error to dictionary."""
        result: Dict[str, Any] = {
            "error_code": self.error_code,
            "message": self.message,
            "severity": self.severity.value,
            "category": self.category.value,
            "exit_code": self.exit_code,
            "timestamp": self.timestamp.isoformat(),
        }
        if self.metadata:
            result["metadata"] = self.metadata
        return result

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=str)

    def log(self) -> None:
        """Log the error with appropriate severity."""
        log_func = {
            ErrorSeverity.DEBUG: logger.debug,
            ErrorSeverity.INFO: logger.info,
            ErrorSeverity.WARNING: logger.warning,
            ErrorSeverity.ERROR: logger.error,
            ErrorSeverity.CRITICAL: logger.critical,
        }.get(self.severity, logger.error)
        log_func(self.message, error_code=self.error_code, **self.metadata)
        if self.stack_trace and self.severity is ErrorSeverity.CRITICAL:
            logger.debug("stack_trace", error_code=self.error_code, trace=self.stack_trace)


class EngineError(Exception):
    """Base exception class for all engine errors."""

    default_code = "ENGINE_ERROR"
    default_category = ErrorCategory.UNKNOWN
    exit_code = 1

    def __init__(
        self,
        message: str,
        error_code: Optional[str] = None,
        severity: ErrorSeverity = ErrorSeverity.ERROR,
        category: Optional[ErrorCategory] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or self.default_code
        self.severity = severity
        self.category = category or self.default_category
        self.metadata = metadata or {}

    def to_structured_error(self) -> StructuredError:
        trace = None
        if sys.exc_info()[0] is not None:
            trace = traceback.format_exc()
        return StructuredError(
            error_code=self.error_code,
            message=self.message,
            severity=self.severity,
            category=self.category,
            exit_code=self.exit_code,
            metadata=self.metadata,
            stack_trace=trace,
        )

    def log(self) -> None:
        self.to_structured_error().log()


class DimensionError(EngineError, ValueError):
    """Operand shapes do not agree."""

    default_code = "DIMENSION_ERROR"
    default_category = ErrorCategory.DIMENSION

    def __init__(self, message: str, shapes: Sequence[Sequence[int]] = (), **kwargs: Any):
        metadata = kwargs.pop("metadata", {})
        if shapes:
            metadata["shapes"] = [list(s) for s in shapes]
            message = f"{message} (shapes: {' vs '.join(str(tuple(s)) for s in shapes)})"
        super().__init__(message, metadata=metadata, **kwargs)


class StructuralError(EngineError, ValueError):
    """Malformed segment or graph structure."""

    default_code = "STRUCTURAL_ERROR"
    default_category = ErrorCategory.STRUCTURE


class BoundsError(EngineError, IndexError):
    """Index outside its valid range."""

    default_code = "BOUNDS_ERROR"
    default_category = ErrorCategory.BOUNDS

    def __init__(self, message: str, index: Optional[int] = None, limit: Optional[int] = None, **kwargs: Any):
        metadata = kwargs.pop("metadata", {})
        if index is not None:
            metadata["index"] = int(index)
        if limit is not None:
            metadata["limit"] = int(limit)
        super().__init__(message, metadata=metadata, **kwargs)


class ContractError(EngineError, ValueError):
    """A documented precondition was violated by the caller."""

    default_code = "CONTRACT_ERROR"
    default_category = ErrorCategory.CONTRACT


class TapeError(ContractError):
    """Misuse of the differentiation tape."""

    default_code = "TAPE_ERROR"


class ParameterError(EngineError, ValueError):
    """An algorithm parameter is out of its admissible range."""

    default_code = "PARAMETER_ERROR"
    default_category = ErrorCategory.PARAMETER

    def __init__(self, message: str, name: Optional[str] = None, value: Any = None, **kwargs: Any):
        metadata = kwargs.pop("metadata", {})
        if name:
            metadata["parameter"] = name
        if value is not None:
            metadata["invalid_value"] = str(value)
        super().__init__(message, metadata=metadata, **kwargs)


class ConfigurationError(EngineError, ValueError):
    """Inconsistent model spec or run configuration."""

    default_code = "CONFIGURATION_ERROR"
    default_category = ErrorCategory.CONFIGURATION
    exit_code = 2

    def __init__(
        self,
        message: str,
        layer_index: Optional[int] = None,
        line: Optional[int] = None,
        **kwargs: Any,
    ):
        metadata = kwargs.pop("metadata", {})
        if layer_index is not None:
            metadata["layer_index"] = layer_index
            message = f"layer {layer_index}: {message}"
        if line is not None:
            metadata["line"] = line
            message = f"line {line}: {message}"
        self.layer_index = layer_index
        self.line = line
        super().__init__(message, metadata=metadata, **kwargs)


class DatasetError(EngineError):
    """Dataset file missing or unreadable."""

    default_code = "DATASET_ERROR"
    default_category = ErrorCategory.DATASET
    exit_code = 2


class TrainingDivergenceError(EngineError, ArithmeticError):
    """Loss became non-finite during training."""

    default_code = "TRAINING_DIVERGED"
    default_category = ErrorCategory.NUMERICAL
    exit_code = 3

    def __init__(self, message: str, epoch: int, **kwargs: Any):
        metadata = kwargs.pop("metadata", {})
        metadata["epoch"] = epoch
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}", metadata=metadata, **kwargs)


def exit_code_for(error: BaseException) -> int:
    """Process exit code for an exception escaping a CLI command."""
    if isinstance(error, EngineError):
        return error.exit_code
    return 1


def cli_error_boundary(func: F) -> F:
    """
    Decorator for CLI commands: logs engine errors as structured errors and
    converts them into the documented exit codes.
    """

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except EngineError as e:
            e.log()
            typer.echo(f"error [{e.error_code}]: {e.message}", err=True)
            raise typer.Exit(code=exit_code_for(e)) from e

    return wrapper  # type: ignore[return-value]
