"""Exceptions for the ftseg engine."""

from typing import Any


class FTSegError(Exception):
    """Base exception for ftseg."""

    exit_code: int = 1

    def __init__(self, message: str, exit_code: int | None = None):
        super().__init__(message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code


class ShapeError(FTSegError):
    """Shape-algebra violation."""

    exit_code = 4


class ValidationError(FTSegError):
    """Value precondition failure."""

    exit_code = 2

    def __init__(self, message: str, errors: dict[str, Any] | None = None):
        super().__init__(message)
        self.errors = errors


class DataError(FTSegError):
    """Dataset file or generator error."""

    exit_code = 2


class TrainingError(FTSegError):
    """Training diverged."""

    exit_code = 3

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch


class IncompatibilityError(FTSegError):
    """Checkpoint and dataset do not fit together."""

    exit_code = 4


class GradcheckError(FTSegError):
    """Finite-difference verification failed."""

    exit_code = 5

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report
