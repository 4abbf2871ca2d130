"""Exception hierarchy shared by the class engine, the solver and the CLI."""


class KrflowError(Exception):
    """Base class for every error raised by krflow."""


class InputError(KrflowError, ValueError):
    """Malformed input: wrong dimensions, negative times, bad coordinates."""


class DomainError(KrflowError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class CurveListError(DomainError):
    """The geometry does not assert that its curve list suffices for Nakai tests."""


class ValidationError(KrflowError, ValueError):
    """A geometry or problem fails one of its structural invariants."""


class PreconditionError(KrflowError, ValueError):
    """Blow-down requested for curves that are not disjoint (-1)-curves."""


class ClassificationError(KrflowError):
    """The limit class cannot be certified as any known singularity type."""


class ClassError(KrflowError, ValueError):
    """A Poisson source does not integrate to zero on the torus."""


class RangeError(KrflowError, ValueError):
    """A background family was evaluated outside its validity interval."""


class FitError(KrflowError, ValueError):
    """A decay fit received too few or non-positive samples."""


class PositivityError(KrflowError):
    """The evolving metric density dropped below the positivity floor."""

    def __init__(self, message, index=None, value=None):
        super().__init__(message)
        self.index = index
        self.value = value


class SingularityReached(KrflowError):
    """Step size fell below its floor; carries the last valid state.

    ``result`` is filled in by :func:`krflow.flow.run` with the partial
    trajectory recorded so far.
    """

    def __init__(self, message, state=None, result=None):
        super().__init__(message)
        self.state = state
        self.result = result


class ConfigError(KrflowError, ValueError):
    """Configuration failed validation; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
