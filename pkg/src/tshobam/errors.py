"""Exception types shared across the package."""


class TshobamError(Exception):
    """Base class for every error raised by this package."""


class NotInScale(TshobamError):
    pass


class EmptyWindow(TshobamError):
    pass


class NonRegressive(TshobamError):
    pass


class ParseError(TshobamError, SyntaxError):
    """Malformed expression text. ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message, offset):
        self.byte_offset = offset
        super().__init__(f"{message} at byte {offset}")


class UnknownIdentifier(ParseError):
    pass


class DomainError(TshobamError, ArithmeticError):
    pass


class ConfigError(TshobamError):
    pass


class HistoryTooShort(TshobamError):
    pass


class NonFinite(TshobamError):
    def __init__(self, t, message="state left the finite range"):
        self.t = t
        super().__init__(f"{message} at t={t!r}")


class NonPositiveWeight(TshobamError):
    pass


class GridMismatch(TshobamError):
    pass


class NoContraction(TshobamError):
    pass


class MaxIterExceeded(TshobamError):
    pass


class NotStable(TshobamError):
    pass


class BracketFailure(TshobamError):
    pass
