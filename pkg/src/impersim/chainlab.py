"""Communication graphs for single-impersonator executions and similarity chains.

A graph is an (n+1)x(R+1) grid: one row per processor plus one for the
adversary.  Genuine traffic is total every round and therefore not drawn;
the only edges run from the adversary's round r-1 slot to a processor's
round r slot and stand for one forged message.  A label on the adversary's
round-r slot fixes the state it enacts at the beginning of round r+1:

* a numeric label i makes it the *inverse* of p_i's state, i.e. p_i's state
  recomputed with the presence of the adversary's round-r message toggled
  (for round 0, with the binary input flipped);
* the ``A`` label evolves the previous shadow state by the protocol, feeding
  it the messages p_i actually received that round;
* no label means the adversary is undefined and must stay silent.

Three edits (label / remove / switch) connect any failure-free graph to the
graph where the adversary runs a full alter ego of one processor, and a
round of switches flips that processor's input invisibly to everyone else.
Chaining this over all processors links the all-0 and all-1 failure-free
executions through pairwise similar graphs, which is what rules out
consensus against even a single impersonator.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Any, Iterable, Sequence

from .errors import HorizonExceeded, PreconditionFailed
from .messages import (
    EMPTY_INBOX,
    Envelope,
    Origin,
    Payload,
    ProcessorId,
    RoundInbox,
    canonical_payload,
    payload_key,
    processor_ids,
    sort_envelopes,
)
from .engine import Decision, TraceDelivery

A_LABEL = "A"

DEFAULT_MAX_N = 4
DEFAULT_MAX_R = 3

Label = Any  # None | "A" | int
Op = tuple   # ("label", alpha, r) | ("remove", r, alpha) | ("switch", r)


@dataclass(frozen=True)
class CommGraph:
    n: int
    rounds: int
    labels: tuple  # length rounds+1, indexed by round 0..R
    edges: frozenset  # {(r, j)}: adversary round r-1 slot -> p_j round r slot
    inputs: tuple  # binary, length n

    def label(self, r: int) -> Label:
        return self.labels[r]

    def with_label(self, r: int, value: Label) -> "CommGraph":
        labels = list(self.labels)
        labels[r] = value
        return replace(self, labels=tuple(labels))

    def with_edge_toggled(self, r: int, j: int) -> "CommGraph":
        edge = (r, j)
        edges = set(self.edges)
        if edge in edges:
            edges.remove(edge)
        else:
            edges.add(edge)
        return replace(self, edges=frozenset(edges))

    def with_input_flipped(self, j: int) -> "CommGraph":
        inputs = list(self.inputs)
        inputs[j - 1] = 1 - inputs[j - 1]
        return replace(self, inputs=tuple(inputs))

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "n": self.n,
            "rounds": self.rounds,
            "labels": list(self.labels),
            "edges": sorted([r, j] for r, j in self.edges),
            "inputs": list(self.inputs),
        }

    @staticmethod
    def from_json(data: dict) -> "CommGraph":
        return CommGraph(
            n=data["n"],
            rounds=data["rounds"],
            labels=tuple(data["labels"]),
            edges=frozenset((r, j) for r, j in data["edges"]),
            inputs=tuple(data["inputs"]),
        )

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dot(self) -> str:
        lines = ["digraph comm {", "  rankdir=LR;"]
        for r in range(self.rounds + 1):
            label = self.labels[r]
            text = "" if label is None else f" [{label}]"
            lines.append(f'  adv_{r} [label="Adv,{r}{text}" shape=box];')
        for i in range(1, self.n + 1):
            for r in range(self.rounds + 1):
                lines.append(f'  p{i}_{r} [label="p_{i},{r}"];')
        for r, j in sorted(self.edges):
            lines.append(f"  adv_{r - 1} -> p{j}_{r};")
        lines.append("}")
        return "\n".join(lines)


def ff_graph(n: int, rounds: int, inputs: Sequence[int]) -> CommGraph:
    return CommGraph(n, rounds, (None,) * (rounds + 1), frozenset(), tuple(inputs))


def validate_graph(g: CommGraph) -> list[str]:
    """All structural restrictions, reported as data rather than raised."""
    violations = []
    if g.n < 1:
        violations.append("n must be >= 1")
    if g.rounds < 1:
        violations.append("horizon must be >= 1")
    if len(g.labels) != g.rounds + 1:
        violations.append(f"labels must cover rounds 0..{g.rounds}")
        return violations
    if len(g.inputs) != g.n or any(v not in (0, 1) for v in g.inputs):
        violations.append("inputs must be binary and cover every processor")
    for r, label in enumerate(g.labels):
        if label is None:
            continue
        if label == A_LABEL:
            if r == 0:
                violations.append("round 0 cannot be labeled A")
            elif g.labels[r - 1] is None:
                violations.append(f"A label at round {r} needs a label at round {r - 1}")
            elif r <= g.rounds:
                missing = [j for j in range(1, g.n + 1) if (r, j) not in g.edges]
                if missing:
                    violations.append(
                        f"A label at round {r} requires full delivery; missing {missing}"
                    )
        elif not (isinstance(label, int) and 1 <= label <= g.n):
            violations.append(f"label at round {r} must be A or a processor index: {label!r}")
    for r, j in sorted(g.edges):
        if not (1 <= r <= g.rounds and 1 <= j <= g.n):
            violations.append(f"edge ({r}, {j}) outside the grid")
        elif g.labels[r - 1] is None:
            violations.append(f"edge ({r}, {j}) from an unlabeled adversary round")
    return violations


def is_ff(g: CommGraph, r: int) -> bool:
    return all(g.labels[rr] is None for rr in range(r, g.rounds + 1))


def pi_graph_identity(g: CommGraph, r: int) -> int | None:
    """The processor an alter-ego-from-round-r graph impersonates, if any."""
    label = g.labels[r]
    if not isinstance(label, int):
        return None
    if any(g.labels[rr] != A_LABEL for rr in range(r + 1, g.rounds + 1)):
        return None
    return label


@dataclass(frozen=True)
class View:
    pid: ProcessorId
    input: Any
    rounds: tuple  # one tuple of (claimed sender, payload) entries per round


@dataclass
class GraphExecution:
    graph: CommGraph
    protocol: Any
    states: dict      # pid -> [state after step call r], index 0 = initial
    outboxes: dict    # pid -> {r: payload}
    inboxes: dict     # pid -> {r: RoundInbox}
    shadow: dict      # r -> (state, payload) or None, the round-r alter ego
    identity: dict    # r -> impersonated ProcessorId or None
    trace: list
    decisions: dict
    views: dict


def _toggle_entry(inbox: RoundInbox, sender: ProcessorId, payload: Payload) -> RoundInbox:
    entries = list(inbox.entries)
    pair = (sender, payload)
    if pair in entries:
        entries.remove(pair)
    else:
        entries.append(pair)
        entries.sort(key=lambda e: (e[0].index, payload_key(e[1])))
    return RoundInbox(tuple(entries))


def inverse_state(execution: GraphExecution, pid: ProcessorId, r: int):
    """Shadow (state, broadcast) mimicking p_i at the beginning of round r.

    For r=1 the input is flipped; otherwise p_i's last transition is re-run
    with the presence of the adversary's round r-1 message toggled.  If the
    adversary had no state in round r-1, the inverse is p_i's actual state.
    """
    protocol = execution.protocol
    if r == 1:
        flipped = 1 - execution.graph.inputs[pid.index - 1]
        state = protocol.init(pid, flipped)
        new_state, items, _ = protocol.step(state, 1, EMPTY_INBOX)
        return new_state, canonical_payload(items)
    if execution.graph.labels[r - 2] is None:
        return execution.states[pid][r], execution.outboxes[pid][r]
    claimed = execution.identity[r - 1]
    payload = execution.shadow[r - 1][1]
    toggled = _toggle_entry(execution.inboxes[pid][r - 1], claimed, payload)
    new_state, items, _ = protocol.step(execution.states[pid][r - 1], r, toggled)
    return new_state, canonical_payload(items)


def execute_graph(g: CommGraph, protocol) -> GraphExecution:
    """Direct interpreter: materialize the execution a graph describes."""
    violations = validate_graph(g)
    if violations:
        raise PreconditionFailed("; ".join(violations))
    ids = processor_ids(g.n)
    execution = GraphExecution(
        graph=g,
        protocol=protocol,
        states={pid: [protocol.init(pid, g.inputs[pid.index - 1])] for pid in ids},
        outboxes={pid: {} for pid in ids},
        inboxes={pid: {} for pid in ids},
        shadow={},
        identity={},
        trace=[],
        decisions={},
        views={},
    )
    for r in range(1, g.rounds + 2):
        for pid in ids:
            prev = execution.inboxes[pid][r - 1] if r > 1 else EMPTY_INBOX
            state, items, decision = protocol.step(execution.states[pid][r - 1], r, prev)
            execution.states[pid].append(state)
            execution.outboxes[pid][r] = canonical_payload(items)
            if decision is not None and pid not in execution.decisions:
                execution.decisions[pid] = Decision(decision, r - 1)
        if r > g.rounds:
            break
        label = g.labels[r - 1]
        if label is None:
            execution.shadow[r] = None
            execution.identity[r] = None
        elif label == A_LABEL:
            ident = execution.identity[r - 1]
            prev_state = execution.shadow[r - 1][0]
            state, items, _ = protocol.step(prev_state, r, execution.inboxes[ident][r - 1])
            execution.shadow[r] = (state, canonical_payload(items))
            execution.identity[r] = ident
        else:
            ident = ProcessorId(label)
            execution.shadow[r] = inverse_state(execution, ident, r)
            execution.identity[r] = ident
        for recv in ids:
            envs = [
                Envelope(src, recv, execution.outboxes[src][r], r, Origin.GENUINE)
                for src in ids
            ]
            if execution.shadow[r] is not None and (r, recv.index) in g.edges:
                envs.append(
                    Envelope(execution.identity[r], recv, execution.shadow[r][1], r, Origin.FORGED)
                )
            ordered = sort_envelopes(envs)
            execution.inboxes[recv][r] = RoundInbox(
                tuple((e.claimed_sender, e.payload) for e in ordered)
            )
            for env in ordered:
                execution.trace.append(
                    TraceDelivery(r, recv, env.claimed_sender, env.forged, env.payload)
                )
    for pid in ids:
        execution.views[pid] = View(
            pid,
            g.inputs[pid.index - 1],
            tuple(execution.inboxes[pid][r].entries for r in range(1, g.rounds + 1)),
        )
    return execution


def views_from_trace(
    trace: Iterable[TraceDelivery], inputs: Sequence[Any], n: int, rounds: int
) -> dict[ProcessorId, View]:
    """Rebuild per-processor views from recorded deliveries (engine or interpreter)."""
    buckets: dict[tuple[ProcessorId, int], list] = {}
    for event in trace:
        if isinstance(event, TraceDelivery):
            buckets.setdefault((event.receiver, event.round_no), []).append(
                (event.claimed_sender, event.payload)
            )
    views = {}
    for pid in processor_ids(n):
        per_round = []
        for r in range(1, rounds + 1):
            entries = sorted(
                buckets.get((pid, r), []), key=lambda e: (e[0].index, payload_key(e[1]))
            )
            per_round.append(tuple(entries))
        views[pid] = View(pid, inputs[pid.index - 1], tuple(per_round))
    return views


def verify_similar(g1: CommGraph, g2: CommGraph, protocol) -> tuple[bool, frozenset[ProcessorId]]:
    """Executions are similar when at most one processor's view differs."""
    if (g1.n, g1.rounds) != (g2.n, g2.rounds):
        raise PreconditionFailed("graphs must share n and horizon")
    v1 = execute_graph(g1, protocol).views
    v2 = execute_graph(g2, protocol).views
    differing = frozenset(pid for pid in v1 if v1[pid] != v2[pid])
    return len(differing) <= 1, differing


# --- graph transformations -------------------------------------------------


def _validated(g: CommGraph, context: str) -> CommGraph:
    violations = validate_graph(g)
    if violations:
        raise PreconditionFailed(f"{context}: {'; '.join(violations)}")
    return g


def op_label(g: CommGraph, alpha: Label, r: int) -> CommGraph:
    """Label the adversary's round-r slot in a graph failure-free from r on."""
    if not is_ff(g, r):
        raise PreconditionFailed(f"graph is not {r}-ff")
    if alpha != A_LABEL and not (isinstance(alpha, int) and 1 <= alpha <= g.n):
        raise PreconditionFailed(f"invalid label {alpha!r}")
    return _validated(g.with_label(r, alpha), f"label({alpha}, {r})")


def op_remove(g: CommGraph, r: int) -> CommGraph:
    """Remove the round-r label; only legal while the slot sent nothing onward."""
    if g.labels[r] is None:
        raise PreconditionFailed(f"round {r} is not labeled")
    if any((r + 1, j) in g.edges for j in range(1, g.n + 1)):
        raise PreconditionFailed(f"round {r} label still has outgoing messages")
    return _validated(g.with_label(r, None), f"remove({r})")


def op_switch(g: CommGraph, r: int) -> CommGraph:
    """Swap a processor with its alter ego from round r+1 on.

    Graph-mechanically this toggles whether p_i received the adversary's
    round-r message (flips its input for r=0).  Both twins broadcast to
    everyone afterwards, so every other processor sees the same multiset of
    p_i-tagged messages before and after: the edit is invisible to them.
    """
    i = pi_graph_identity(g, r)
    if i is None:
        raise PreconditionFailed(f"not an alter-ego graph from round {r}")
    if r == 0:
        out = g.with_input_flipped(i)
    elif g.labels[r - 1] is not None:
        out = g.with_edge_toggled(r, i)
    else:
        # No adversary message existed in round r: the twins are identical
        # copies and the swap edits nothing.
        out = g
    return _validated(out, f"switch({r})")


def apply_op(g: CommGraph, op: Op) -> CommGraph:
    if op[0] == "label":
        return op_label(g, op[1], op[2])
    if op[0] == "remove":
        _, r, alpha = op
        if g.labels[r] != alpha:
            raise PreconditionFailed(f"remove({r}) expected label {alpha!r}")
        return op_remove(g, r)
    if op[0] == "switch":
        return op_switch(g, op[1])
    raise PreconditionFailed(f"unknown op {op!r}")


def reverse_ops(ops: Sequence[Op]) -> tuple[Op, ...]:
    inverted = []
    for op in reversed(ops):
        if op[0] == "label":
            inverted.append(("remove", op[2], op[1]))
        elif op[0] == "remove":
            inverted.append(("label", op[2], op[1]))
        else:
            inverted.append(op)
    return tuple(inverted)


@dataclass(frozen=True)
class ChainStep:
    op: Op
    graph: CommGraph


def _check_caps(n: int, rounds: int, max_n: int, max_r: int, force: bool) -> None:
    if force:
        return
    if n > max_n or rounds > max_r:
        raise HorizonExceeded(
            f"chain construction capped at n<={max_n}, R<={max_r}; got n={n}, R={rounds}"
        )


def _pi_ops(n: int, rounds: int, i: int, r: int, memo: dict) -> tuple[Op, ...]:
    """Edit sequence from any r-ff graph to the full alter-ego graph for p_i.

    The sequence depends only on (n, R, i, r): labeling, then for each later
    round connecting the shadow to every processor one switch at a time
    (recursively creating and dismantling a one-round-later alter ego to make
    each switch legal) before committing that round to the A label.
    """
    key = (i, r)
    if key in memo:
        return memo[key]
    ops: list[Op] = [("label", i, r)]
    for rr in range(r + 1, rounds + 1):
        for j in range(1, n + 1):
            sub = _pi_ops(n, rounds, j, rr, memo)
            ops.extend(sub)
            ops.append(("switch", rr))
            ops.extend(reverse_ops(sub))
        ops.append(("label", A_LABEL, rr))
    result = tuple(ops)
    memo[key] = result
    return result


def build_pi_chain(
    g_ff: CommGraph,
    i: int,
    r: int,
    *,
    max_n: int = DEFAULT_MAX_N,
    max_r: int = DEFAULT_MAX_R,
    force: bool = False,
) -> list[ChainStep]:
    """Chain from an r-ff graph to the graph whose adversary fully enacts p_i."""
    _check_caps(g_ff.n, g_ff.rounds, max_n, max_r, force)
    if not is_ff(g_ff, r):
        raise PreconditionFailed(f"graph is not {r}-ff")
    steps = []
    g = g_ff
    for op in _pi_ops(g_ff.n, g_ff.rounds, i, r, {}):
        g = apply_op(g, op)
        steps.append(ChainStep(op, g))
    return steps


def full_chain_ops(n: int, rounds: int) -> tuple[Op, ...]:
    memo: dict = {}
    ops: list[Op] = []
    for i in range(1, n + 1):
        fwd = _pi_ops(n, rounds, i, 0, memo)
        ops.extend(fwd)
        ops.append(("switch", 0))
        ops.extend(reverse_ops(fwd))
    return tuple(ops)


def build_full_chain(
    n: int,
    rounds: int,
    *,
    max_n: int = DEFAULT_MAX_N,
    max_r: int = DEFAULT_MAX_R,
    force: bool = False,
) -> tuple[CommGraph, list[ChainStep]]:
    """Similarity chain from the all-0 to the all-1 failure-free graph.

    Each processor's input is flipped in turn: build its alter ego, switch
    the roles (invisible to everyone else), then dismantle the evidence by
    replaying the construction backwards.
    """
    _check_caps(n, rounds, max_n, max_r, force)
    start = ff_graph(n, rounds, (0,) * n)
    steps = []
    g = start
    for op in full_chain_ops(n, rounds):
        g = apply_op(g, op)
        steps.append(ChainStep(op, g))
    return start, steps
