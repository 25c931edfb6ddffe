"""Exception types raised across the engine."""

from __future__ import annotations


class ToolpathError(Exception):
    """Base class for every error raised by this package."""


class MalformedArguments(ToolpathError):
    pass


class InvalidCase(ToolpathError):
    pass


class EmptyGraph(ToolpathError):
    pass


class CyclicDependency(ToolpathError):
    def __init__(self, cycle: list[int]):
        self.cycle = cycle
        super().__init__("dependency cycle: " + " -> ".join(map(str, cycle)))


class IndexOutOfRange(ToolpathError):
    pass


class SelfEdge(ToolpathError):
    pass


class InvalidVisitedSet(ToolpathError):
    pass


class GraphTooLarge(ToolpathError):
    pass


class EmptySequence(ToolpathError):
    pass


class KeySetMismatch(ToolpathError):
    pass


class EmptyTab(ToolpathError):
    pass


class MissingLabel(ToolpathError):
    pass


class MissingGoldData(ToolpathError):
    pass


class InvalidLength(ToolpathError):
    pass


class InvalidPlan(ToolpathError):
    pass


class EmptyReport(ToolpathError):
    pass


class ConnectorError(ToolpathError):
    """The agent connector failed to produce a usable reply."""


class ConnectorTimeout(ConnectorError):
    pass


class ProtocolError(ConnectorError):
    pass
