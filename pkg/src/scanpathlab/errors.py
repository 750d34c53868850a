"""Shared exception types.

Every module raises from this small hierarchy so callers can tell apart
caller bugs (ContractViolation), numeric corruption (NumericFault),
malformed files (FormatError) and metrics evaluated outside their domain
(UndefinedMetricError).
"""


class ContractViolation(ValueError):
    """An argument or call sequence breaks a documented precondition."""


class NumericFault(ArithmeticError):
    """A NaN/Inf appeared where the numeric contracts forbid it."""


class FormatError(ValueError):
    """A file or blob does not match its declared on-disk format."""


class UndefinedMetricError(ValueError):
    """A metric was requested on inputs for which it is not defined."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; the message names the stage and context."""
