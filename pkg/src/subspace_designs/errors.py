"""
Exceptions raised by the subspace design toolkit.

Arithmetic non-integrality is deliberately absent: it is returned as a
``qarith.NonIntegral`` value so that scans can collect it.
"""
from typing import Any, Optional


class QDesignError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameters(QDesignError, ValueError):
    """Design parameters or operation inputs outside the supported domain."""


class AmbientMismatch(QDesignError, ValueError):
    """Operands live in different ambient spaces (dimension or field)."""


class MalformedEncoding(QDesignError, ValueError):
    """A subspace encoding could not be parsed."""


class NotCanonical(QDesignError, ValueError):
    """An encoded basis is not the reduced row echelon form of its row space."""


class NotInvertible(QDesignError, ValueError):
    """A matrix offered as a group element is singular."""


class NotPrimitive(QDesignError, ValueError):
    """A polynomial does not give a companion matrix of order p^d - 1."""


class BudgetExceeded(QDesignError):
    """An iteration, time or node budget ran out.

    ``partial`` carries whatever was computed before the budget ran out.
    """

    def __init__(self, message: str, limit: Optional[int] = None, partial: Any = None):
        super().__init__(message)
        self.limit = limit
        self.partial = partial


class OrbitBudgetExceeded(BudgetExceeded):
    """An orbit grew beyond the caller-supplied cap."""

    def __init__(self, limit: int):
        super().__init__(f"orbit exceeded {limit:,} elements", limit=limit)


class IncompleteCensus(QDesignError):
    """A census was used where a certified complete one is required."""


class CorruptCheckpoint(QDesignError):
    """A census or block file failed its header or certificate checks."""


class CheckpointLocked(QDesignError):
    """Another process owns the checkpoint file."""
