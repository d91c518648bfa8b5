"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class AccountingError(RuntimeError):
    """A numerical accountant could not produce a trustworthy answer."""


class ResourceError(RuntimeError):
    """The request exceeds a configured size limit."""


class ConstructionError(RuntimeError):
    """A constructed object failed its post-construction validation.

    Attributes:
      worst: the largest violation observed during validation.
    """

    def __init__(self, message, worst=float("nan")):
        super().__init__(message)
        self.worst = worst


class SearchExhaustedError(RuntimeError):
    """A search finished its grid without finding a witness."""
