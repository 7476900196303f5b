"""Exception hierarchy shared across the simulator."""

from __future__ import annotations


class SimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimError):
    """A parameter combination violates a protocol precondition or the schema."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class BudgetError(SimError):
    """The adversary tried to inject more than k messages for one receiver."""

    def __init__(self, receiver, count: int, limit: int):
        self.receiver = receiver
        self.count = count
        self.limit = limit
        super().__init__(f"{receiver} targeted by {count} forged messages, budget is {limit}")


class EngineInvariantError(SimError):
    """An internal delivery guarantee of the round engine was broken."""


class ProtocolInvariantError(SimError):
    """A protocol-level guarantee failed; indicates an over-budget adversary or a bug."""


class MissingValue(ProtocolInvariantError):
    """rank() was asked about a value that is not in the set."""


class EmptyM(ProtocolInvariantError):
    """Set agreement reached its decision point with no accepted value."""


class NoQualifyingValue(ProtocolInvariantError):
    """No value crossed the strict occurrence threshold for late joiners."""


class GraphError(SimError):
    """Base class for communication-graph errors."""


class PreconditionFailed(GraphError):
    """A graph transformation was applied outside its domain."""


class GraphMismatch(GraphError):
    """A communication graph does not fit the engine configuration."""


class HorizonExceeded(GraphError):
    """Chain construction was asked to exceed the configured size caps."""
