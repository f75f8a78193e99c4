"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class PlatoonError(Exception):
    code = "PLATOON"


class InvalidParameter(PlatoonError, ValueError):
    code = "INVALID_PARAMETER"


class NonPositiveLag(InvalidParameter):
    code = "NON_POSITIVE_LAG"


class BadMpfDepth(InvalidParameter):
    code = "BAD_MPF_DEPTH"


class OffGridDelay(InvalidParameter):
    code = "OFF_GRID_DELAY"


class EmptyPlatoon(InvalidParameter):
    code = "EMPTY_PLATOON"


class DimensionMismatch(PlatoonError, ValueError):
    code = "DIMENSION_MISMATCH"


class HistoryUnderflow(PlatoonError, IndexError):
    code = "HISTORY_UNDERFLOW"


class UnstableChannel(PlatoonError, ArithmeticError):
    code = "UNSTABLE_CHANNEL"


class NonzeroCommDelay(InvalidParameter):
    code = "NONZERO_COMM_DELAY"


class NonNegativePole(InvalidParameter):
    code = "NON_NEGATIVE_POLE"


class NonPositiveGain(InvalidParameter):
    code = "NON_POSITIVE_GAIN"


class InvalidAxis(InvalidParameter):
    code = "INVALID_AXIS"


class ProfileError(PlatoonError, ValueError):
    code = "PROFILE"


class NonMonotoneTime(ProfileError):
    code = "NON_MONOTONE_TIME"


class NegativeSpeed(ProfileError):
    code = "NEGATIVE_SPEED"


class EmptyFile(ProfileError):
    code = "EMPTY_FILE"


class ConfigError(PlatoonError, ValueError):
    code = "CONFIG"


class ParseError(ConfigError):
    code = "PARSE"

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class UnknownKey(ConfigError):
    code = "UNKNOWN_KEY"
