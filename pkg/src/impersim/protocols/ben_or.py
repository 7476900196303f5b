"""Randomized binary consensus for n > 2k via crash-failure simulation.

Duplicated sender tags are dropped before any counting, which turns the
impersonation adversary into at most k per-receiver omissions per round; on
top of that filtered view runs a classic two-round coin-flipping phase
structure: report the estimate, propose on a strict majority, decide on k+1
matching proposals.  Decided processors keep following the message schedule
with their decided value and additionally beacon it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any

from ..engine import mix_seed
from ..messages import ProcessorId, RoundInbox
from .base import ProtocolSpec, StepResult

KIND_REPORT = "BR_REPORT"
KIND_PROPOSE = "BR_PROPOSE"
KIND_DECIDED = "DECIDED"


def async_filter(inbox: RoundInbox) -> RoundInbox:
    """Drop every entry whose claimed sender appears more than once.

    A forged twin kills its victim's genuine copy too, so at most k sender
    ids vanish per round and every surviving entry is genuine.
    """
    counts = inbox.tag_counts()
    return RoundInbox(tuple(e for e in inbox.entries if counts[e[0]] == 1))


def _coin(seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return digest[0] & 1


@dataclass(frozen=True)
class BenOrState:
    x: int
    phase: int
    decided: int | None
    coin_seed: int
    coins_used: int


class BenOrProtocol(ProtocolSpec):
    kind = "ben_or"

    def __init__(self, n: int, k: int, seed: int, max_phases: int = 60):
        self.n = n
        self.k = k
        self.seed = seed
        self.max_phases = max_phases

    def default_max_rounds(self) -> int:
        return 2 * self.max_phases

    def init(self, pid: ProcessorId, value: Any) -> BenOrState:
        return BenOrState(int(value), 1, None, mix_seed(self.seed, "coin", pid.index), 0)

    def _outbox(self, state: BenOrState, item: tuple) -> tuple:
        if state.decided is not None:
            return (item, (KIND_DECIDED, state.decided))
        return (item,)

    def step(self, state: BenOrState, round_no: int, inbox: RoundInbox) -> StepResult:
        if round_no == 1:
            return state, self._outbox(state, (KIND_REPORT, 1, state.x)), None

        filtered = async_filter(inbox)
        senders = filtered.item_senders()
        ended = round_no - 1

        if ended % 2 == 1:
            # End of a report round: propose the strict majority value, if any.
            phase = (ended + 1) // 2
            majority = None
            for value in (0, 1):
                if 2 * len(senders.get((KIND_REPORT, phase, value), ())) > self.n:
                    majority = value
            proposal = state.decided if state.decided is not None else majority
            out = self._outbox(state, (KIND_PROPOSE, phase, proposal))
            return state, out, None

        # End of a proposal round: decide, adopt, or flip a coin.
        phase = ended // 2
        support = {
            item[2]: len(who)
            for item, who in senders.items()
            if item[0] == KIND_PROPOSE and item[1] == phase and item[2] is not None
        }
        x = state.x
        decided = state.decided
        coins_used = state.coins_used
        decision = None
        if decided is None:
            strong = sorted(v for v, c in support.items() if c >= self.k + 1)
            if strong:
                decided = strong[0]
                x = decided
                decision = decided
            elif support:
                x = min(support)
            else:
                x = _coin(state.coin_seed, coins_used)
                coins_used += 1
        new_state = BenOrState(x, phase + 1, decided, state.coin_seed, coins_used)
        out = self._outbox(new_state, (KIND_REPORT, phase + 1, x))
        return new_state, out, decision
