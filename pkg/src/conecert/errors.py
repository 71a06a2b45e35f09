"""Exception hierarchy shared by all conecert modules."""


class ConecertError(Exception):
    """Base class for every error raised by the package."""


# geometry
class EmptyGrid(ConecertError):
    pass


class DegenerateCut(ConecertError):
    pass


# operator
class NotElliptic(ConecertError):
    pass


class AsymmetricDiffusion(ConecertError):
    pass


class NegativeReaction(ConecertError):
    pass


class InvalidBoundary(ConecertError):
    pass


class SignPatternViolation(ConecertError):
    pass


class GridMismatch(ConecertError):
    pass


# greens
class SolverDiverged(ConecertError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class NoConvergence(ConecertError):
    pass


class NotPositiveOperator(ConecertError):
    pass


class ZeroInput(ConecertError):
    pass


# expr
class ExprSyntaxError(ConecertError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(ConecertError):
    pass


class UnboundName(ConecertError):
    pass


class EvalDomainError(ConecertError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


# functionals
class NegativeFunctionalValue(ConecertError):
    pass


class PointOutsideDomain(ConecertError):
    pass


class NegativeNonlinearity(ConecertError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class BoundViolated(ConecertError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


# fixedpoint / certificates / cli
class OutOfBox(ConecertError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class MissingConstant(ConecertError):
    pass


class BoundsNotVerified(ConecertError):
    pass


class SchemaError(ConecertError):
    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class ValidationError(ConecertError):
    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
