"""
Exception hierarchy for tobitsel.
Library code raises these; the application layer catches TobitSelError.
"""
from typing import Iterable, Sequence


class TobitSelError(Exception):
    """Base class for every error raised by tobitsel."""


class ContractViolation(TobitSelError, ValueError):
    """Arguments break an operation's preconditions (shapes, ranges, enums)."""


class DomainError(TobitSelError, ValueError):
    """A parameter lies outside its mathematical domain (sigma <= 0, non-PD matrix)."""


class NonIdentifiable(TobitSelError):
    """The likelihood has no finite maximizer, e.g. every response is censored."""


class RankDeficient(TobitSelError):
    """The design matrix does not have full column rank."""


class DegenerateReplicate(TobitSelError):
    """A bootstrap replicate could not be made valid within the redraw budget."""

    def __init__(self, message: str, redraws: int = 0):
        super().__init__(message)
        self.redraws = redraws


class EmptyComplement(TobitSelError):
    """Every observation was drawn, so the out-of-bag complement is empty."""


class PenaltyUndefined(TobitSelError):
    """A closed-form penalty is undefined for this (n, k)."""


class ConfigError(TobitSelError):
    """Invalid run configuration or configuration file."""


class DataError(TobitSelError):
    """Input data cannot be turned into a CensoredDataset."""


class MissingColumn(DataError):
    def __init__(self, columns: Iterable[str]):
        self.columns = list(columns)
        super().__init__(f"Missing column(s): {', '.join(self.columns)}")


class NonNumericColumn(DataError):
    def __init__(self, columns: Iterable[str]):
        self.columns = list(columns)
        super().__init__(f"Non-numeric column(s): {', '.join(self.columns)}")


class NegativeResponse(DataError):
    def __init__(self, row: int, value: float):
        self.row = row
        self.value = value
        super().__init__(f"Negative response {value!r} at row {row}")


class MissingValues(DataError):
    def __init__(self, rows: Sequence[int]):
        self.rows = list(rows)
        shown = ", ".join(str(r) for r in self.rows[:20])
        more = "" if len(self.rows) <= 20 else f" (+{len(self.rows) - 20} more)"
        super().__init__(f"Missing values in row(s) {shown}{more}")


# Fit failures that trigger replicate redraws and family skips.
FIT_FAILURES = (NonIdentifiable, RankDeficient)
