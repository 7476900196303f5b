"""Order-preserving renaming on top of an echoed (id, value) pair vector.

Round 1 broadcasts the input, round 2 echoes every (sender, value) pair
observed, and from round 3 on a pair enters the accepted vector V once its
echo arrives from all n distinct claimed ids in a single round; an echo from
at least n-k distinct ids is re-echoed the following round.  A processor
takes new name r at the first round-end r+3 at which the rank of its own
input among the values of V equalled r for two consecutive round-ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from ..errors import MissingValue
from ..messages import ProcessorId, RoundInbox
from .base import ProtocolSpec, StepResult

KIND_INPUT = "INPUT"
KIND_ECHO1 = "ECHO1"
KIND_ECHO = "ECHO"


def rank(value: Any, values: Iterable[Any]) -> int:
    """1-based position of value among the distinct values in ascending order."""
    distinct = sorted(set(values))
    if value not in distinct:
        raise MissingValue(f"{value!r} not present among {distinct!r}")
    return distinct.index(value) + 1


@dataclass(frozen=True)
class RenamingState:
    v0: int
    pairs: frozenset  # accepted (id, value) pairs, grows monotonically
    sched: frozenset  # pairs queued for re-echo in the upcoming round
    rank_prev: int | None
    decided: int | None


class RenamingProtocol(ProtocolSpec):
    kind = "renaming"

    def __init__(self, n: int, k: int, skip_round2_echo: bool = False):
        self.n = n
        self.k = k
        # Fault-injection hook for negative tests: silently drop the round-2
        # echo so the pair vector can never fill.
        self.skip_round2_echo = skip_round2_echo

    def default_max_rounds(self) -> int:
        return self.n + self.k + 4

    def init(self, pid: ProcessorId, value: Any) -> RenamingState:
        return RenamingState(value, frozenset(), frozenset(), None, None)

    def step(self, state: RenamingState, round_no: int, inbox: RoundInbox) -> StepResult:
        if round_no == 1:
            return state, ((KIND_INPUT, state.v0),), None
        if round_no == 2:
            if self.skip_round2_echo:
                return state, (), None
            seen = {
                (sender, item[1])
                for sender, payload in inbox
                for item in payload
                if item[0] == KIND_INPUT
            }
            return state, tuple((KIND_ECHO1, p, v) for p, v in seen), None

        pairs, sched = state.pairs, state.sched
        senders = inbox.item_senders()
        if round_no == 3:
            # End of round 2: echoes confirmed by all n ids get a first echo.
            sched = frozenset(
                (item[1], item[2])
                for item, who in senders.items()
                if item[0] == KIND_ECHO1 and len(who) >= self.n
            )
        else:
            fresh = set()
            resend = set()
            for item, who in senders.items():
                if item[0] != KIND_ECHO:
                    continue
                pair = (item[1], item[2])
                if len(who) >= self.n:
                    fresh.add(pair)
                if len(who) >= self.n - self.k:
                    resend.add(pair)
            pairs = pairs | frozenset(fresh)
            sched = frozenset(resend)

        ended = round_no - 1
        decided = state.decided
        rank_prev = state.rank_prev
        decision = None
        if ended >= 3:
            values = {v for _, v in pairs}
            current = rank(state.v0, values)
            slot = ended - 3
            if decided is None and 1 <= slot <= self.n + self.k:
                if current == slot and rank_prev == slot:
                    decided = slot
                    decision = slot
            rank_prev = current

        out = tuple((KIND_ECHO, p, v) for p, v in pairs | sched)
        new_state = RenamingState(state.v0, pairs, sched, rank_prev, decided)
        return new_state, out, decision
