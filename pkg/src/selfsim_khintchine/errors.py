"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class AlphabetError(DomainError):
    """A word uses a letter that is not in the alphabet of the IFS."""


class EnumerationLimitError(DomainError):
    """Full enumeration would exceed the configured size cap."""


class UnsupportedDimensionError(DomainError):
    """The requested dimension is not supported by this routine."""


class HypothesisFailure(RuntimeError):
    """A checked hypothesis does not hold for the supplied data."""


class IdentityViolation(AssertionError):
    """An algebraic identity that must always hold was found to fail.

    Raising this means there is a bug, not a bad input.
    """
