"""Exception types raised across the package."""


class FiniteContextError(Exception):
    """Base class for all package errors."""


class NormalizationError(FiniteContextError, ValueError):
    """A vector expected to have unit norm does not."""


class DimensionMismatchError(FiniteContextError, ValueError):
    """Operands live in Hilbert spaces of different dimension."""


class InvalidProjectorError(FiniteContextError, ValueError):
    """A matrix violates the Hermitian/idempotent projector invariants."""


class InvalidTupleError(FiniteContextError, ValueError):
    """A measurement tuple is not complete or not pairwise orthogonal."""


class DomainError(FiniteContextError, ValueError):
    """A measure or frame function was evaluated outside its declared domain."""


class UnderdeterminedError(FiniteContextError, ValueError):
    """Least-squares design matrix is rank deficient."""

    def __init__(self, message, null_dim):
        super().__init__(f"{message} (null-space dimension {null_dim})")
        self.null_dim = null_dim


class NotAStateError(FiniteContextError, ValueError):
    """A reconstructed operator is not a density operator."""

    def __init__(self, message, min_eigenvalue, trace):
        super().__init__(f"{message}: min eigenvalue {min_eigenvalue:.3e}, trace {trace:.12g}")
        self.min_eigenvalue = min_eigenvalue
        self.trace = trace


class MembershipError(FiniteContextError, ValueError):
    """A measurement was queried outside a model's declared set of measurements."""


class MissingInterfaceError(FiniteContextError, TypeError):
    """A model lacks an optional interface required by a check."""


class SpecError(FiniteContextError, ValueError):
    """Error raised while parsing or building a measure description.

    Carries the 1-based ``line`` and ``column`` of the offending token.
    """

    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SpecSyntaxError(SpecError):
    pass


class UnknownIdentifierError(SpecError):
    pass


class SpecDimensionError(SpecError):
    pass
