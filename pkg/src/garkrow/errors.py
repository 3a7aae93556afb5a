"""Exception and warning types shared across the package."""


class GarkError(Exception):
    """Base class for all package errors."""


class Singular(GarkError):
    """A matrix pivot fell below the singularity threshold."""


class SingularStageMatrix(Singular):
    """The stage matrix ``I - h*gamma*M`` could not be factored."""


class SingularGz(Singular):
    """The algebraic Jacobian ``g_z`` is singular at the current state."""


class NotDecoupled(GarkError):
    """No stage evaluation order makes every stage implicit in itself only."""


class NewtonDivergence(GarkError):
    """A Newton iteration failed to reach its tolerance."""


class StepSizeUnderflow(GarkError):
    """The adaptive controller asked for a step below the allowed minimum."""


class UnknownMethod(GarkError, KeyError):
    """The requested built-in method id does not exist."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class ShapeMismatch(GarkError, ValueError):
    """Array shapes or stage counts are incompatible."""


class StructureMismatch(GarkError, ValueError):
    """A tableau lacks the block structure an operation requires."""


class DomainError(GarkError, ValueError):
    """A model function was evaluated outside its domain."""


class InconsistentState(UserWarning):
    """The algebraic constraint is violated on entry to a DAE step."""
