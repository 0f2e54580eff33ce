"""Exception types shared across the package."""


class SubregLabError(Exception):
    """Base class for all package errors."""


class EmptySetError(SubregLabError):
    """An operation that needs a nonempty set received the empty set."""


class DomainError(SubregLabError):
    """An argument fell outside the domain of a map or operation."""


class CapabilityError(SubregLabError):
    """A map lacks the oracle (e.g. an inverse) required by the operation."""


class ApplicabilityError(SubregLabError):
    """A theorem's precondition fails, so the check cannot be applied."""


class AnalysisError(SubregLabError):
    """A trace or dataset is unsuitable for the requested analysis."""


class SubproblemFailure(SubregLabError):
    """The iteration subproblem had no solution in the search window."""

    def __init__(self, message: str, scan_min: float, scan_argmin: float):
        super().__init__(message)
        self.scan_min = scan_min
        self.scan_argmin = scan_argmin


class SpecError(SubregLabError):
    """An experiment spec failed validation."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
