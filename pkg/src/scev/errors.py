"""Exception hierarchy.

Every error raised by the package derives from :class:`SCEVError`. Pipeline
stages attach a ``stage`` tag before re-raising so the CLI can name the step
that failed without losing the original exception type.
"""

from __future__ import annotations


class SCEVError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str = "", *, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def with_stage(self, stage: str) -> "SCEVError":
        # innermost tag wins; outer stages prepend
        self.stage = stage if self.stage is None else f"{stage}/{self.stage}"
        return self

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class ValidationError(SCEVError, ValueError):
    pass


class ConflictingConstraints(ValidationError):
    pass


class UnknownObject(ValidationError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return SCEVError.__str__(self)


class DegenerateInput(ValidationError):
    pass


class MissingSeedClass(ValidationError):
    pass


class ZeroVector(ValidationError):
    pass


class InfeasibleAssignment(SCEVError):
    pass


class LengthMismatch(ValidationError):
    pass


class UnmappedLabel(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class TooFewObjects(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class AllZeroWeights(ValidationError):
    pass


class AllAbstained(SCEVError):
    pass


class ParseError(SCEVError, ValueError):
    """Malformed input file. ``row``/``column`` are 1-based when known."""

    def __init__(self, message: str, *, path=None, row: int | None = None,
                 column: int | None = None, stage: str | None = None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{', '.join(loc)}: {message}"
        super().__init__(message, stage=stage)
        self.path = path
        self.row = row
        self.column = column


class NonNumericFeature(ParseError):
    pass


class DuplicateId(ParseError):
    pass


class RaggedRows(ParseError):
    pass


class EmptyColumn(ParseError):
    pass
