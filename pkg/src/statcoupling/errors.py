"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed input: bad probability vector, shape mismatch, unknown name."""


class EnumerationTooLarge(ValidationError):
    """Exact enumeration would exceed the configured state cap."""

    def __init__(self, needed, cap, what="enumeration"):
        self.needed = needed
        self.cap = cap
        super().__init__(f"{what} too large: {needed} states exceeds cap {cap}")


class CostDomainError(ValueError):
    """Cost evaluated outside its domain (e.g. log|x - y| at x == y)."""


class SingularityError(ArithmeticError):
    """Mixed derivative c_{x,y} vanished where it must be invertible."""


class InversionError(ArithmeticError):
    """The map u -> grad_x c(x0, u) could not be inverted."""


class NotCConcaveError(ValueError):
    """A c-supergradient required by a construction does not exist."""


class NumericCheckFailed(AssertionError):
    """A theorem-level inequality failed beyond its tolerance."""
