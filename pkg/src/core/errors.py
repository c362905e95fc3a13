"""
Exception and warning types raised by the groupfs library.

Library code raises; only ``main.py`` turns these into exit codes.
"""

from __future__ import annotations
from typing import Any, Dict, Optional


class GroupFSError(Exception):
    """Base class for every error the library raises on purpose."""


class InvalidArgumentError(GroupFSError, ValueError):
    """A precondition on an argument was violated."""


class NumericalError(GroupFSError, ArithmeticError):
    """Non-finite values or a failed decomposition."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({details})"


class TrainingAborted(NumericalError):
    """Training hit a non-finite loss; ``partial`` holds the last good model."""

    def __init__(self, message: str, partial: Any = None,
                 diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message, diagnostics)
        self.partial = partial


class ClusteringError(GroupFSError):
    """k-means could not populate the requested number of clusters."""


class DataParseError(GroupFSError, ValueError):
    """Malformed CSV input; ``row`` is 1-based and counts the header line."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{message} at {', '.join(location)}"
        super().__init__(message)
        self.row = row
        self.column = column


# ---------------------------------------------------------------------
# Warnings
# ---------------------------------------------------------------------

class ConstantFeatureWarning(UserWarning):
    """A feature column had zero variance and was left at zero."""


class BudgetWarning(UserWarning):
    """A selection budget could not be met with the available groups."""
