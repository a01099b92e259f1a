"""Exception types shared across the package."""


class SparseMtlError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(SparseMtlError, ValueError):
    """Array dimensions do not line up."""


class InvalidDataError(SparseMtlError, ValueError):
    """Input data contains NaN/inf or is empty."""


class ParameterError(SparseMtlError, ValueError):
    """A hyperparameter or option is out of its valid range."""


class ParseError(SparseMtlError, ValueError):
    """A data file could not be parsed; message names file and line."""


class UndefinedMetricError(SparseMtlError, ValueError):
    """A metric is undefined for the given input (e.g. zero reference)."""


class OracleFailure(SparseMtlError, RuntimeError):
    """The numeric oracle did not converge within its iteration budget."""
