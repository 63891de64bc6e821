"""Exception types raised by the solvers and the CLI."""


class GenRHError(Exception):
    """Base class for all package errors."""


class NonIntegerWinding(GenRHError):
    pass


class WindingMismatch(GenRHError):
    pass


class DegenerateEmbedding(GenRHError):
    pass


class MapIterationDiverged(GenRHError):
    pass


class SingularityTooClose(GenRHError):
    pass


class NearBoundaryUnresolved(GenRHError):
    pass


class SingularFredholm(GenRHError):
    pass


class PinningSingular(GenRHError):
    pass


class WrongNullspaceDimension(GenRHError):
    def __init__(self, message, found=None, expected=None):
        super().__init__(message)
        self.found = found
        self.expected = expected


class RatioUndefined(GenRHError):
    pass


class KernelBoundViolated(GenRHError):
    pass


class EllipticityViolated(GenRHError):
    pass


class IterationDiverged(GenRHError):
    pass


class IndexOutOfRange(GenRHError):
    pass


class MultivaluedPotential(GenRHError):
    def __init__(self, message, moments=None):
        super().__init__(message)
        self.moments = moments


class ParseError(GenRHError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}, column {column})"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ValidationError(GenRHError):
    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant


class MissingReport(GenRHError):
    pass
