"""Full-information protocol and a deliberately naive consensus on top of it.

Each processor rebroadcasts its entire view every round, which makes views
maximally informative: a processor's state is exactly its input plus its
inbox history.  The majority strawman decides the majority input bit seen in
round 1; it exists to be broken by similarity-chain scans.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ..messages import ProcessorId, RoundInbox
from .base import ProtocolSpec, StepResult

KIND_VIEW = "VIEW"


def _freeze(inbox: RoundInbox) -> tuple:
    return tuple(inbox.entries)


@dataclass(frozen=True)
class FullInfoState:
    input: Any
    history: tuple  # one frozen inbox per processed round


class FullInfoProtocol(ProtocolSpec):
    kind = "full_info"

    def init(self, pid: ProcessorId, value: Any) -> FullInfoState:
        return FullInfoState(value, ())

    def step(self, state: FullInfoState, round_no: int, inbox: RoundInbox) -> StepResult:
        if round_no > 1:
            state = FullInfoState(state.input, state.history + (_freeze(inbox),))
        out = ((KIND_VIEW, state.input, state.history),)
        return state, out, None


class MajorityStrawmanProtocol(FullInfoProtocol):
    kind = "majority_strawman"

    def __init__(self, rounds: int):
        self.rounds = rounds

    def step(self, state: FullInfoState, round_no: int, inbox: RoundInbox) -> StepResult:
        state, out, _ = super().step(state, round_no, inbox)
        decision = None
        if round_no - 1 == self.rounds:
            votes = [
                item[1]
                for _, payload in state.history[0]
                for item in payload
                if item[0] == KIND_VIEW
            ]
            ones = sum(1 for v in votes if v == 1)
            decision = 1 if 2 * ones > len(votes) else 0
        return state, out, decision
