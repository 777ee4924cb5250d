"""Exception hierarchy.

Everything raised on purpose by the library derives from :class:`IsospecError`,
so the CLI can map it to exit code 2 in one place.
"""

from __future__ import annotations


class IsospecError(Exception):
    """Base class for library errors."""


class ParseError(IsospecError):
    """Source text is not in the expression grammar.

    ``offset`` is the UTF-8 byte offset of the offending token.
    """

    def __init__(self, message: str, source: str, offset: int):
        self.source = source
        self.offset = offset
        super().__init__(f"{message} at byte {offset} in {source!r}")


class UnknownIdentifierError(ParseError):
    pass


class DomainError(IsospecError, ValueError):
    """An expression was evaluated outside its real domain."""

    def __init__(self, message: str, x: float | None = None):
        self.x = x
        if x is not None:
            message = f"{message} (at x={x:.12g})"
        super().__init__(message)


class QuadratureError(IsospecError):
    """Adaptive quadrature exhausted its subdivision budget."""


class InvalidSuperpotentialError(IsospecError):
    """The integrating factor is not strictly positive."""


class WindowTooWideError(IsospecError):
    """The integrating factor overflows inside the requested window."""

    def __init__(self, message: str, x: float):
        self.x = x
        super().__init__(f"{message} (at x={x:.12g})")


class SingularityError(IsospecError):
    """gamma + Gamma(x) vanishes: the family member is singular there."""

    def __init__(self, gamma: float, x: float | None):
        self.gamma = gamma
        self.x = x
        where = "outside the window" if x is None else f"x={x:.12g}"
        super().__init__(f"family member gamma={gamma:.12g} is singular at {where}")


class InfiniteGammaError(IsospecError, ZeroDivisionError):
    def __init__(self):
        super().__init__(
            "Phi_g(0) equals the particular solution; gamma = inf (nonparametric member)"
        )


class ForbiddenIntervalError(IsospecError, ValueError):
    def __init__(self, gamma: float):
        self.gamma = gamma
        super().__init__(f"gamma={gamma:.12g} lies in the forbidden interval [-1, 0]")


class NonNormalizableError(IsospecError):
    pass


class UndefinedError(IsospecError):
    """A locus formula is undefined at the requested point."""

    def __init__(self, message: str, x: float):
        self.x = x
        super().__init__(f"{message} (at x={x:.12g})")


class PeakError(IsospecError):
    pass


class SpectrumError(IsospecError):
    pass


class WindowTooSmallError(SpectrumError):
    pass


class UnsupportedSpectrumError(SpectrumError):
    pass
