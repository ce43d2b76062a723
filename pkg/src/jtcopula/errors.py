"""Exception hierarchy.

Two families matter to callers: :class:`InputError` (bad data, bad options,
bad files; CLI exit code 2) and :class:`InvariantViolation` (internal
consistency broken; CLI exit code 3).
"""


class JtcError(Exception):
    """Base class for all errors raised by this package."""


class InputError(JtcError, ValueError):
    pass


class InvariantViolation(JtcError, RuntimeError):
    pass


# ingestion / partitions


class ParseError(InputError):
    def __init__(self, message, row=None, col=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"col {col}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.col = col


class RaggedRows(ParseError):
    pass


class NonFinite(ParseError):
    pass


class IndivisibleN(InputError):
    def __init__(self, m, N):
        super().__init__(f"sample size N={N} is not divisible by m={m}")
        self.m = m
        self.N = N


class DuplicateValues(InputError):
    pass


class UncoveredValue(InputError):
    pass


class NonMonotoneEdges(InputError):
    pass


class PartitionKindMismatch(InputError):
    pass


# tables


class EmptyScope(InputError):
    pass


class ScopeNotSubset(InputError):
    pass


class OffGridPoint(InputError):
    pass


class ScopeMismatch(InputError):
    pass


class InconsistentMarginals(InputError):
    pass


# structures / models


class SingleVariable(InputError):
    pass


class TooFewVariables(InputError):
    pass


class InvalidStructure(InputError):
    pass


class MissingPartitions(InputError):
    pass


class SchemaMismatch(InputError):
    pass


class CorruptFile(InputError):
    pass


class BadSpec(InputError):
    pass


class ZeroModelMass(InvariantViolation):
    """Model assigns zero mass to a cell the data supports."""


class ConsistencyViolation(InvariantViolation):
    pass
