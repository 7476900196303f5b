"""Two-round (k+1)-set agreement for n > |V|k.

Round 1 broadcasts the input.  A value seen from more than k distinct claimed
ids is echoed in round 2; it is accepted once its echo arrives from all n
distinct ids, and the decision is the minimum accepted value.  Forged traffic
alone can never push a value past the strict >k threshold, so every accepted
value is some real processor's input.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Sequence

from ..errors import EmptyM, NoQualifyingValue
from ..messages import ProcessorId, RoundInbox
from .base import ProtocolSpec, StepResult

KIND_VALUE = "SAVAL"
KIND_ECHO = "SAECHO"


@dataclass(frozen=True)
class SetAgreementState:
    v0: Any
    qualifying: frozenset
    chosen: frozenset  # the accepted value set M
    decided: Any | None


class SetAgreementProtocol(ProtocolSpec):
    kind = "set_agreement"

    def __init__(self, n: int, k: int, value_domain: Sequence[Any]):
        self.n = n
        self.k = k
        self.value_domain = tuple(value_domain)

    def default_max_rounds(self) -> int:
        return 2

    def init(self, pid: ProcessorId, value: Any) -> SetAgreementState:
        return SetAgreementState(value, frozenset(), frozenset(), None)

    def step(self, state: SetAgreementState, round_no: int, inbox: RoundInbox) -> StepResult:
        if round_no == 1:
            return state, ((KIND_VALUE, state.v0),), None
        if round_no == 2:
            senders = inbox.item_senders()
            qualifying = frozenset(
                item[1]
                for item, who in senders.items()
                if item[0] == KIND_VALUE and len(who) > self.k
            )
            out = tuple((KIND_ECHO, v) for v in sorted(qualifying))
            return SetAgreementState(state.v0, qualifying, state.chosen, None), out, None
        if round_no == 3 and state.decided is None:
            senders = inbox.item_senders()
            chosen = frozenset(
                v
                for v in state.qualifying
                if len(senders.get((KIND_ECHO, v), ())) >= self.n
            )
            if not chosen:
                raise EmptyM("no value accepted; n > |V|k violated or engine broken")
            decided = min(chosen)
            return SetAgreementState(state.v0, state.qualifying, chosen, decided), (), decided
        return state, (), None


def boost_participants(decisions: Sequence[Any], extra_messages: Sequence[Any], k: int) -> Any:
    """Decision rule for processors joining after a completed run.

    ``decisions`` are the broadcast decision values of the original
    participants; ``extra_messages`` are up to k forged additions.  Any value
    occurring strictly more than k times is safe to adopt; the smallest such
    value is returned for determinism.
    """
    if len(extra_messages) > k:
        raise ValueError(f"at most {k} forged messages allowed, got {len(extra_messages)}")
    counts = Counter(decisions)
    counts.update(extra_messages)
    qualified = [v for v, c in counts.items() if c > k]
    if not qualified:
        raise NoQualifyingValue(f"no value above {k} occurrences in {dict(counts)}")
    return min(qualified)
