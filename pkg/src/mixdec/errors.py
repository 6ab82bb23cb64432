"""Exception hierarchy shared by all mixdec modules."""


class MixdecError(Exception):
    """Base class for all errors raised by this package."""


class ExpressionSyntaxError(MixdecError):
    """Raised when a map expression cannot be tokenized or parsed."""

    def __init__(self, message, position=None, source=None):
        self.position = position
        self.source = source
        if position is not None:
            message = f"{message} (column {position + 1})"
        super().__init__(message)


class EvaluationError(MixdecError):
    """Expression evaluation failed (overflow, division by zero, ...)."""


class OutOfDomainError(MixdecError):
    """A point left a non-periodic axis of the system domain."""


class InverseUnavailableError(MixdecError):
    """An operation needed the inverse map but none was supplied."""


class SystemValidationError(MixdecError):
    """A supplied inverse or Jacobian failed its consistency check."""


class ConfigError(MixdecError):
    """A system configuration file is malformed or incomplete."""


class RegionError(MixdecError):
    """A restricting region does not intersect the system domain."""


class TrivialClassError(MixdecError):
    """A period/cyclic-class query was made on a trivial class."""


class ClassTooLargeError(MixdecError):
    """The brute-force period oracle refuses classes above desk scale."""


class SaddleTypeError(MixdecError):
    """Manifold growth requires a planar saddle-type orbit."""


class NoIntersectionError(MixdecError):
    """A pointwise-class query has no known homoclinic intersection."""


class InconclusiveError(MixdecError):
    """A budgeted search ended without a conclusive answer."""

    def __init__(self, message, detail=None):
        self.detail = detail
        super().__init__(message)


class SurgeryInstanceError(MixdecError):
    """A perturbation-domain or pseudo-orbit instance is malformed."""


class Condition3NotRequestableError(MixdecError):
    """Period control requested on an orbit whose length is already a
    multiple of the forbidden period."""


class ConnectingBoundError(MixdecError):
    """The connecting-sequence displacement bound is unsatisfiable for
    the given sequence length N."""

    def __init__(self, message, minimal_n=None):
        self.minimal_n = minimal_n
        super().__init__(message)


class NonAffineChartError(MixdecError):
    """Constructive connecting sequences need the map affine on the chart."""


class SurgeryInvariantError(MixdecError):
    """A bound the surgery proof guarantees was violated at runtime;
    indicates an invalid domain or an implementation bug."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class CertificateError(MixdecError):
    """A final certificate (ball disjointness, period control, closing
    residual) failed verification."""
