"""Exception hierarchy shared by all modules.

Each class carries a ``category`` string that the command line driver maps
onto an exit code and writes into machine-readable error reports.
"""

from __future__ import annotations


class GTraceError(Exception):
    category = "error"


class DomainError(GTraceError, ValueError):
    """An argument lies outside the set on which an operation is defined."""

    category = "precondition"


class PreconditionError(GTraceError, ValueError):
    category = "precondition"


class SingularityError(DomainError):
    """Evaluation requested on (or too close to) a singular set."""

    category = "precondition"


class SobolevIndexError(PreconditionError):
    """Sobolev index outside the range where a map is bounded."""

    category = "precondition"


class UnsupportedScenarioError(PreconditionError):
    category = "precondition"


class ToleranceError(GTraceError, ArithmeticError):
    """A numerical routine failed to reach its requested accuracy."""

    category = "tolerance"


class UsageError(GTraceError):
    category = "usage"
