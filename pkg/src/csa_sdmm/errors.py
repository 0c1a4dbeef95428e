"""Exception hierarchy shared across the package."""


class SDMMError(Exception):
    """Base class for all errors raised by csa_sdmm."""


class FieldMismatchError(SDMMError, ValueError):
    """Operands live in different prime fields."""


class PartitionError(SDMMError, ValueError):
    """A matrix dimension is not divisible by the requested block count."""


class ShapeError(SDMMError, ValueError):
    """Matrix shapes are inconsistent for the requested operation."""


class InfeasibleSchemeError(SDMMError, ValueError):
    """Scheme parameters violate a feasibility constraint (e.g. Q > N)."""


class PlanConstructionError(SDMMError, RuntimeError):
    """Evaluation points could not be drawn within the retry budget."""


class InsufficientResponsesError(SDMMError, ValueError):
    """Fewer than Q distinct server observations were supplied to the decoder."""


class SingularMatrixError(SDMMError, ArithmeticError):
    """A matrix that must be invertible over F_p turned out singular."""


class SecurityViolation(SDMMError, AssertionError):
    """A noise-mixing map is rank deficient, so a colluding view may leak."""


class ProtocolError(SDMMError, IOError):
    """Malformed or unexpected frame on the coordinator/worker wire."""


class StragglerError(SDMMError, TimeoutError):
    """A worker did not answer within the configured timeout."""

    def __init__(self, server_index, timeout):
        super().__init__(f"server {server_index} did not respond within {timeout:.1f}s")
        self.server_index = server_index
        self.timeout = timeout


class PipelineError(SDMMError, RuntimeError):
    """Decoding or verification failed during a harness run."""
