"""Exception types shared across the package."""


class CCGError(Exception):
    """Base class for all package errors."""


class ConfigError(CCGError):
    """Invalid configuration input (bad keys, units, ranges). CLI exit code 2."""


class NumericalError(CCGError):
    """Numerical failure: non-convergence, norm drift, lost positivity. CLI exit code 3."""


class GridResolutionError(NumericalError):
    """Grid too coarse for the requested state or kick phases."""


class RecordInTailError(CCGError):
    """Measurement outcome fell so far in the tail that the masked state underflowed.

    Callers should resample the record.
    """
