"""Exception and warning types shared across the package."""


class IsoConvexError(Exception):
    """Base class for all errors raised by this package."""


class NonPositiveDeterminant(IsoConvexError, ValueError):
    """A deformation gradient with det F <= 0 was passed to a GL+(2) routine."""


class DegenerateMatrix(IsoConvexError, ValueError):
    """Closed-form singular values hit a numerically contradictory radicand."""


class ZeroMatrix(IsoConvexError, ValueError):
    pass


class DomainError(IsoConvexError, ArithmeticError):
    """A scalar function was evaluated outside its real domain."""


class ParseError(IsoConvexError, SyntaxError):
    """Malformed energy expression; ``offset`` is the 0-based byte offset."""

    def __init__(self, message, offset=None, source=None):
        super().__init__(message if offset is None else f"{message} (at offset {offset})")
        self.offset = offset
        self.source = source


class UnknownIdentifier(ParseError):
    def __init__(self, name, offset=None, source=None):
        super().__init__(f"unknown identifier {name!r}", offset, source)
        self.name = name


class WrongVariable(ParseError):
    def __init__(self, name, expected, offset=None, source=None):
        super().__init__(f"variable {name!r} used where {expected!r} was declared", offset, source)
        self.name = name
        self.expected = expected


class InfimumUnreliable(IsoConvexError, ArithmeticError):
    """Grid infimum whose tail probes keep decreasing without settling."""


class QuadratureDivergence(IsoConvexError, ArithmeticError):
    pass


class NotMonotone(IsoConvexError, ValueError):
    pass


class OutOfDomain(IsoConvexError, ValueError):
    pass


class OverlapError(IsoConvexError, ValueError):
    pass


class NestingError(IsoConvexError, ValueError):
    pass


class LeftGLplus(IsoConvexError, ValueError):
    """A perturbed deformation gradient left GL+(2) at some quadrature node."""


class SymmetryWarning(UserWarning):
    """A user isochoric formula is not literally symmetric under t -> 1/t."""


class ProfileRescaledWarning(UserWarning):
    pass
