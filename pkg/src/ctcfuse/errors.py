"""Exception hierarchy shared across the package.

The three mid-level classes map onto CLI exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class CtcfuseError(Exception):
    pass


class ConfigError(CtcfuseError):
    pass


class DataError(CtcfuseError):
    pass


class NumericError(CtcfuseError):
    pass


# --- signal / feature errors ---------------------------------------------

class EmptySignal(DataError):
    pass


class ZeroPowerSignal(DataError):
    pass


class DegenerateUtterance(DataError):
    pass


class SingularAlignment(DataError):
    pass


class InsufficientData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class OffsetTooLarge(DataError):
    pass


# --- sequence loss errors --------------------------------------------------

class InfeasibleLabelSequence(DataError):
    pass


class InstanceTooLarge(DataError):
    pass


class CacheMismatch(CtcfuseError):
    pass


class NonFiniteGradient(NumericError):
    pass


# --- decoding / scoring errors ---------------------------------------------

class AlphabetMismatch(DataError):
    pass


class NoPathFound(DataError):
    pass


class EmptyReference(DataError):
    pass


class IncompleteMap(DataError):
    pass


class NoMatchedPairs(DataError):
    pass


class ParseError(DataError):
    """Malformed file contents; message carries file (and line when known)."""
