"""Exception hierarchy shared by every module."""


class SigBasisError(Exception):
    """Base class for all library errors."""


class InvalidInputError(SigBasisError, ValueError):
    """Arguments violate a documented precondition."""


class IncompleteSignatureError(SigBasisError, KeyError):
    """A signature vector lacks a component that was asked for."""

    def __init__(self, word):
        self.word = word
        super().__init__(f"signature has no component for word {word}")

    def __str__(self):
        return self.args[0]


class SingularFitError(SigBasisError, ArithmeticError):
    """Normal equations are singular (typically OLS on the full word set)."""


class DataError(SigBasisError, ValueError):
    """Computed data is unusable, e.g. a non-finite feature."""


class InvariantError(SigBasisError, AssertionError):
    """An internal invariant was violated; this indicates a bug."""
