"""Exception hierarchy.

Every domain error derives from :class:`FarecheckError`; the CLI maps these to
exit code 1 and prints the class name so callers can match on it.
"""

from __future__ import annotations


class FarecheckError(Exception):
    """Base class for all domain errors."""


# network
class UnknownStation(FarecheckError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class DuplicateId(FarecheckError):
    pass


class Disconnected(FarecheckError):
    pass


class InfeasibleLeg(FarecheckError):
    pass


# ingest
class ParseError(FarecheckError):
    def __init__(self, message: str, *, row: int | None = None, line: int | None = None,
                 field: str | None = None):
        self.row = row
        self.line = line
        self.field = field
        where = []
        if row is not None:
            where.append(f"row {row}")
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class EmptyLog(FarecheckError):
    pass


class NegativeCount(ParseError):
    pass


class SpecInvalid(FarecheckError):
    pass


# attack analysis
class InsufficientData(FarecheckError):
    pass


class NoPath(FarecheckError):
    pass


# trace generation
class DegenerateRidership(FarecheckError):
    pass


class BudgetTooSmall(FarecheckError):
    pass


class EmptyBatch(FarecheckError):
    pass


class NonFiniteLoss(FarecheckError):
    pass


# evaluation
class EmptySample(FarecheckError):
    pass


class NeedTwoPeriods(FarecheckError):
    pass


class DimensionMismatch(FarecheckError):
    pass
