"""Exception hierarchy.

Every error maps onto one of the CLI exit-code classes through ``exit_code``:
2 for bad input, 3 for bad configuration, 4 for numerical failure.
"""


class GmkError(Exception):
    exit_code = 2


class InputError(GmkError, ValueError):
    exit_code = 2


class ConfigError(GmkError, ValueError):
    exit_code = 3


class NumericalError(GmkError, ArithmeticError):
    exit_code = 4


# motion-core
class MissingFile(InputError, FileNotFoundError):
    pass


class ColumnCountMismatch(InputError):
    def __init__(self, row, expected=None, found=None):
        self.row = row
        msg = f"row {row}: expected {expected} columns, found {found}"
        super().__init__(msg)


class MissingData(InputError):
    pass


class NonFiniteValue(InputError):
    def __init__(self, row, col):
        self.row, self.col = row, col
        super().__init__(f"non-finite value at row {row}, column {col}")


class RootChannelsNotPosition(InputError):
    pass


class RootChannelMissing(InputError):
    pass


class WindowTooLarge(InputError):
    pass


class WindowEven(InputError):
    pass


class EmptySubset(InputError):
    pass


class TooFewFrames(InputError):
    pass


# pattern-analysis
class NonPositiveSigma(InputError):
    pass


# windowing
class UnsortedWords(InputError):
    pass


class OverlappingWords(InputError):
    pass


class FrameSpanOutOfBounds(InputError):
    pass


class EmptySpan(InputError):
    pass


# tokenizer
class DimensionMismatch(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class EmptyInput(InputError):
    pass


class InsufficientFrames(InputError):
    pass


class RankDeficient(NumericalError):
    pass


class NegativeComponent(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


# metrics
class TooFewSamples(InputError):
    pass


class NotSymmetric(NumericalError):
    pass


class TooFewSequences(InputError):
    pass


class EmptyBeats(InputError):
    pass


class KTooLarge(InputError):
    pass


class EmptySet(InputError):
    pass


# annotations
class MalformedJson(InputError):
    def __init__(self, line, detail=""):
        self.line = line
        super().__init__(f"line {line}: malformed JSON {detail}".rstrip())


class UnknownFunction(InputError):
    def __init__(self, line, label):
        self.line, self.label = line, label
        super().__init__(f"line {line}: unknown function label {label!r}")


class EmptyCorpus(InputError):
    pass


class ZeroVariance(InputError):
    pass


class LengthMismatch(InputError):
    pass
