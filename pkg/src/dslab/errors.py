"""Error taxonomy shared by every dslab module.

Each exception carries a ``kind`` (its class name) so the command-line front
end can report a single machine-readable error record.
"""

from __future__ import annotations


class DSLabError(Exception):
    """Base class for all computation failures."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class CapExceeded(DSLabError):
    pass


class SieveLimitTooSmall(DSLabError):
    pass


class PrecisionExhausted(DSLabError):
    pass


class GoodIndexSetNotFound(DSLabError):
    def __init__(self, message: str, trajectory=()):
        super().__init__(message)
        self.trajectory = tuple(trajectory)


class BruteForceLimitExceeded(DSLabError):
    pass


class MassUnreachable(DSLabError):
    pass


class UnionTooLarge(DSLabError):
    pass


class HypothesisViolated(DSLabError):
    pass


class PreconditionViolated(DSLabError):
    pass


class InvalidModulus(DSLabError):
    pass


class GammaOutsideWindow(DSLabError):
    pass


class NestingUnreachable(DSLabError):
    pass


class UnsupportedInput(DSLabError):
    pass


class EmptyTable(DSLabError):
    pass


class DegenerateBlock(DSLabError):
    pass


class RecordFormatError(DSLabError):
    pass
