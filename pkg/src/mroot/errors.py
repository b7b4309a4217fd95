"""Exception hierarchy.

Domain errors (the point lies outside where the metric is defined or
regular) carry the offending point so reports can echo it; the CLI maps
them to exit code 3.
"""


class MRootError(Exception):
    pass


class IndexOutOfRange(MRootError, ValueError):
    pass


class DuplicateOrbit(MRootError, ValueError):
    pass


class ArityExceeded(MRootError, ValueError):
    pass


class OrderOutOfRange(MRootError, ValueError):
    pass


class ParseError(MRootError, ValueError):
    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class DegenerateFit(MRootError):
    pass


class ResidualTooLarge(MRootError):
    pass


class StepFailure(MRootError):
    pass


class DomainError(MRootError):
    def __init__(self, message, x=None, p=None):
        self.x = None if x is None else [float(v) for v in x]
        self.p = None if p is None else [float(v) for v in p]
        super().__init__(message)


class NonPositiveRadicand(DomainError):
    pass


class SingularMetric(DomainError):
    pass


class NonPositiveVolume(DomainError):
    pass
