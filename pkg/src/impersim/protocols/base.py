"""Pure per-round protocol interface driven by the engine."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any

from ..messages import ProcessorId, RoundInbox

StepResult = tuple  # (state, broadcast items, optional decision)


class ProtocolSpec(ABC):
    """A deterministic round-based protocol.

    ``step(state, r, inbox)`` is called once per round r with the inbox the
    processor received in round r-1 (empty for r=1).  It returns the new
    state, the items to broadcast in round r, and the decision made at the
    end of round r-1, if any.  Identical arguments must yield identical
    results, and nothing about a message's origin is ever visible here.
    """

    kind: str = "abstract"

    @abstractmethod
    def init(self, pid: ProcessorId, value: Any):
        """Build the initial state of one processor from its id and input."""

    @abstractmethod
    def step(self, state, round_no: int, inbox: RoundInbox) -> StepResult:
        """Advance one processor across a round boundary."""

    def default_max_rounds(self) -> int:
        raise NotImplementedError
