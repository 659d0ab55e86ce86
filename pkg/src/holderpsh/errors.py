"""Exception hierarchy shared by every module of the toolkit."""


class HolderPshError(Exception):
    """Base class for all toolkit errors."""


class OutsideDomain(HolderPshError, ValueError):
    pass


class OutsideCollar(HolderPshError, ValueError):
    pass


class ResolutionExhausted(HolderPshError, RuntimeError):
    pass


class DegenerateShift(HolderPshError, ValueError):
    pass


class NoValidExponent(HolderPshError, RuntimeError):
    pass


class NoFeasibleLambda(HolderPshError, RuntimeError):
    pass


class InvalidSchedule(HolderPshError, ValueError):
    pass


class OverflowHorizon(HolderPshError, OverflowError):
    pass


class BracketTooWide(HolderPshError, RuntimeError):
    pass


class EmptySample(HolderPshError, ValueError):
    pass


class InvalidGeometry(HolderPshError, ValueError):
    pass


class DiscOutsideDomain(HolderPshError, ValueError):
    pass


class SpecParseError(HolderPshError, ValueError):
    """Raised for malformed domain spec or config files.

    ``line`` and ``field`` locate the problem when known.
    """

    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.field = field
