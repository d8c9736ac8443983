"""Exception hierarchy shared by all modules."""


class DynTwistError(Exception):
    """Base class for every error raised by the package."""


class DegenerateDenominator(DynTwistError, ZeroDivisionError):
    """A denominator vanishes at the declared base point (or identically)."""


class TruncationError(DynTwistError, ValueError):
    """Inconsistent truncation orders."""


class IdenticallyDegenerate(DynTwistError):
    """det W(lambda) vanishes identically for a declared splitting."""


class NotEquivariant(DynTwistError):
    """A cochain or twist fails the h-equivariance identity."""


class FrameDegenerate(DynTwistError):
    """A frame of vector-field jets does not span at the base point."""


class DegenerateForm(DynTwistError):
    """A 2-form is not invertible at the base point."""


DegenerateAtBasePoint = DegenerateForm


class NotClosed(DynTwistError):
    """A characteristic form handed to the Fedosov solver is not closed."""


class NotStronglyInvariant(DynTwistError):
    """A star product fails h * f - f * h = hbar chi_h(f)."""


class ExtractionInconsistent(DynTwistError):
    """The compatible product is not of the left-invariant twist form."""


class NotCocycle(DynTwistError):
    """A cochain difference violates the cocycle conditions."""


class InputInvalid(DynTwistError, ValueError):
    """An instance document failed validation; ``path`` names the field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
