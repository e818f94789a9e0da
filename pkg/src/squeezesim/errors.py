"""Exception types shared by all modules."""


class SqueezeSimError(Exception):
    """Base class for package errors."""


class PreconditionError(SqueezeSimError, ValueError):
    """An input violates an operation's precondition."""


class NumericError(SqueezeSimError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class MixedStateError(PreconditionError):
    """Moments are inconsistent with a pure Gaussian state."""


class ValidationError(SqueezeSimError):
    """Configuration validation failure carrying every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
