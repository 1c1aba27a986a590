"""Exception types for the hsgp package.

Three broad families, matching the CLI exit codes: configuration problems
(exit 2), data problems (exit 3) and numeric failures (exit 4).
"""


class HsgpError(Exception):
    """Base class for all package errors."""


class ConfigError(HsgpError):
    """Invalid or inconsistent run configuration."""


class DataError(HsgpError):
    """Problem with input data (files, shapes, emptiness)."""


class NumericError(HsgpError):
    """Numeric failure during computation (non-finite values, degeneracies)."""


# --- data errors -----------------------------------------------------------

class MissingFile(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row, col, message=""):
        self.row = row
        self.col = col
        super().__init__(f"parse error at row {row}, column {col}: {message}")


class NonFiniteValue(DataError):
    def __init__(self, row, col):
        self.row = row
        self.col = col
        super().__init__(f"non-finite value at row {row}, column {col}")


class TooFewTimepoints(DataError):
    pass


class TooFewNodes(DataError):
    pass


class WindowTooLarge(DataError):
    pass


class WindowLeavesTooFew(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class ZeroMatrix(DataError):
    pass


class EmptyDataset(DataError):
    pass


class AsymmetricInput(DataError):
    pass


class KOutOfRange(DataError):
    pass


class EmptyKeptSet(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class EpochOutOfRange(DataError):
    pass


class InvalidTarget(DataError):
    pass


class InconsistentChain(DataError):
    pass


class InvalidSpec(ConfigError):
    pass


class BatchTooSmall(DataError):
    pass


# --- numeric errors --------------------------------------------------------

class NonFiniteParams(NumericError):
    pass


class NonFiniteGradient(NumericError):
    pass


class ZeroNormEmbedding(NumericError):
    pass
