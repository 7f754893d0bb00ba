"""Exception hierarchy shared by all modules."""


class SuperdenseError(Exception):
    pass


class InvalidSurface(SuperdenseError):
    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class DisconnectedSurface(InvalidSurface):
    pass


class DegenerateBasis(SuperdenseError):
    pass


class UnsupportedTable(SuperdenseError):
    pass


class NonTermination(SuperdenseError):
    pass


class MeshTooCoarse(SuperdenseError):
    pass


class StartTooClose(SuperdenseError):
    pass


class IrrationalSlope(SuperdenseError):
    pass


class OrientationReversing(SuperdenseError):
    pass


class TooFewSamples(SuperdenseError):
    pass


class NonPositiveInput(SuperdenseError, ValueError):
    pass


class NonPositiveC(NonPositiveInput):
    pass


class PrecisionExhausted(SuperdenseError):
    def __init__(self, message, expansion=None):
        super().__init__(message)
        self.expansion = expansion


class KTooLarge(SuperdenseError, ValueError):
    pass


class SingularTruncation(SuperdenseError):
    pass


class ParseError(SuperdenseError, ValueError):
    pass


class ValidationFailed(InvalidSurface):
    pass


class IoError(SuperdenseError, OSError):
    pass
