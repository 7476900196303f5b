import pytest

from impersim.messages import (
    EMPTY_INBOX,
    ProcessorId,
    RoundInbox,
    canonical_payload,
    payload_key,
)


def symmetric_run(protocol, instances, rounds):
    """Reference system of freely chosen instances with full broadcast.

    ``instances`` is a list of (pid, input) pairs; pids may repeat, which is
    how additional copies of a stolen identity are modeled.  Every instance
    receives every broadcast (its own included) each round.  Returns each
    instance's broadcast stream and decisions: the oracle that engine-level
    twin injection must reproduce.
    """
    states = [protocol.init(pid, value) for pid, value in instances]
    inbox = EMPTY_INBOX
    streams = [[] for _ in instances]
    decisions = [None] * len(instances)
    for round_no in range(1, rounds + 2):
        outs = []
        for idx, state in enumerate(states):
            state, items, decision = protocol.step(state, round_no, inbox)
            states[idx] = state
            outs.append(canonical_payload(items))
            if decision is not None and decisions[idx] is None:
                decisions[idx] = (decision, round_no - 1)
        if round_no > rounds:
            break
        for idx, out in enumerate(outs):
            streams[idx].append(out)
        entries = sorted(
            ((instances[idx][0], out) for idx, out in enumerate(outs)),
            key=lambda e: (e[0].index, payload_key(e[1])),
        )
        inbox = RoundInbox(tuple(entries))
    return streams, decisions


@pytest.fixture
def pids():
    return [ProcessorId(i) for i in range(1, 10)]
