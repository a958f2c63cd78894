"""Exception types shared across the package."""


class EmsnmError(Exception):
    """Base class for every error raised by emsnm."""


# topology
class TopologyError(EmsnmError, ValueError):
    pass


class DisconnectedTopology(TopologyError):
    pass


class NegativeCoefficient(TopologyError):
    pass


class DuplicateNode(TopologyError):
    pass


class NoPath(EmsnmError, LookupError):
    pass


class NotOversized(EmsnmError, ValueError):
    pass


# mib / emsstore
class UnknownOid(EmsnmError, LookupError):
    pass


class ForeignNode(EmsnmError, ValueError):
    pass


class UnknownSource(EmsnmError, LookupError):
    pass


class NoRow(EmsnmError, LookupError):
    pass


class ZeroDenominator(EmsnmError, ZeroDivisionError):
    pass


# strategies / engine
class EmptyDomain(EmsnmError, ValueError):
    pass


class UnknownEdge(EmsnmError, LookupError):
    pass


class InvalidSize(EmsnmError, ValueError):
    pass


# costmodel
class DimensionMismatch(EmsnmError, ValueError):
    pass


# harness
class ParseError(EmsnmError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(EmsnmError, ValueError):
    pass


class MismatchError(EmsnmError, AssertionError):
    """Simulated ledger and analytical model disagree."""

    def __init__(self, name: str, simulated, model):
        self.name = name
        self.simulated = simulated
        self.model = model
        super().__init__(f"{name}: simulated {simulated} != model {model}")
