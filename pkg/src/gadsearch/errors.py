"""Exception types shared across the toolkit."""


class GadSearchError(Exception):
    """Base class for all toolkit errors."""


# -- dataset errors ----------------------------------------------------------

class MissingFile(GadSearchError):
    pass


class ParseError(GadSearchError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column}: cannot parse {value!r} as a finite number")


class RaggedRow(GadSearchError):
    def __init__(self, row: int, expected: int, got: int):
        self.row = row
        super().__init__(f"row {row}: expected {expected} cells, got {got}")


class EmptyDataset(GadSearchError):
    pass


class NoLabels(GadSearchError):
    pass


class SubsetTooLarge(GadSearchError):
    pass


# -- classifier errors -------------------------------------------------------

class DimensionMismatch(GadSearchError):
    pass


class SingleClass(GadSearchError):
    pass


class ProcessSpawnError(GadSearchError):
    pass


class ProtocolError(GadSearchError):
    def __init__(self, line: str, reason: str):
        self.line = line
        super().__init__(f"bad reply {line!r}: {reason}")


class Timeout(GadSearchError):
    pass


# -- scoring errors ----------------------------------------------------------

class EmptyVector(GadSearchError):
    pass


class TooFewPoints(GadSearchError):
    pass


class NonPositiveResponseForLog(GadSearchError):
    pass


class TooFewFlipped(GadSearchError):
    pass


# -- search errors -----------------------------------------------------------

class DegenerateConfidence(GadSearchError):
    pass


class BudgetExceedsPool(GadSearchError):
    pass


class EmptyInput(GadSearchError):
    pass


class InsufficientEligiblePool(GadSearchError):
    pass
