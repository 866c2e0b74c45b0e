"""Exception hierarchy shared by all mpjoin modules."""


class MPJoinError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(MPJoinError, ValueError):
    """A caller-supplied argument violates an operation's precondition."""


class FormatError(MPJoinError, ValueError):
    """An input file does not conform to its declared binary format."""


class RangeError(MPJoinError, ValueError):
    """A value cannot be represented in the target floating-point format."""


class AccumulatorOverflow(MPJoinError, ArithmeticError):
    """An FP32 accumulator reached infinity during multiply-accumulate."""


class ConfigError(MPJoinError, ValueError):
    """A tile configuration violates the tiling hierarchy invariants."""


class CalibrationError(MPJoinError, RuntimeError):
    """Epsilon calibration could not bracket or reach the target selectivity."""
