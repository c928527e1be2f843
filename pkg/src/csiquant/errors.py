"""Exception types. Each carries the CLI exit code it maps to."""


class CsiQuantError(Exception):
    exit_code = 1


class ConfigError(CsiQuantError, ValueError):
    exit_code = 2


class DimensionError(ConfigError):
    pass


class DataError(CsiQuantError, ValueError):
    exit_code = 3


class CorruptFileError(DataError):
    pass


class NumericalFault(CsiQuantError, ArithmeticError):
    exit_code = 4


class AllocationSaturated(CsiQuantError):
    """No output is eligible for a bit decrement/increment."""

    exit_code = 4
