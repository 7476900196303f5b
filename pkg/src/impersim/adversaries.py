"""Pluggable adversary strategies for the round engine.

A strategy is rushing and omniscient: it sees every input and the current
round's genuine broadcasts before choosing its forgeries.  Whatever it
returns must fit the per-receiver budget; the engine enforces that on every
round.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Sequence

from .chainlab import A_LABEL, CommGraph, validate_graph
from .engine import Decision, EngineConfig, mix_seed
from .errors import GraphMismatch, PreconditionFailed
from .messages import (
    EMPTY_INBOX,
    Envelope,
    Item,
    Origin,
    Payload,
    ProcessorId,
    RoundInbox,
    canonical_payload,
    payload_key,
)

Broadcasts = dict  # ProcessorId -> Payload, the round's genuine traffic
Inputs = dict      # ProcessorId -> input value


class AdversaryStrategy:
    """Base strategy: never forges."""

    def bind(self, cfg: EngineConfig, ids: tuple[ProcessorId, ...]) -> None:
        self.cfg = cfg
        self.ids = ids

    def observe(self, round_no: int, broadcasts: Broadcasts, inputs: Inputs) -> list[Envelope]:
        return []

    def settled(self) -> bool:
        """Whether the run may stop once all real processors decided."""
        return True

    def finish(self) -> None:
        """Called once after the last delivered round."""


class NullAdversary(AdversaryStrategy):
    pass


def null_adversary() -> AdversaryStrategy:
    return NullAdversary()


class ScriptedAdversary(AdversaryStrategy):
    """Injects a fixed list of (round, receiver, claimed, items) forgeries."""

    def __init__(self, script: Sequence[tuple[int, ProcessorId, ProcessorId, Sequence[Item]]]):
        self.script = list(script)

    def observe(self, round_no, broadcasts, inputs):
        return [
            Envelope(claimed, receiver, canonical_payload(items), round_no, Origin.FORGED)
            for r, receiver, claimed, items in self.script
            if r == round_no
        ]


class DuplicateSpammer(AdversaryStrategy):
    """Replays exact copies of chosen senders' broadcasts, creating twins.

    Under duplicate-dropping this silences the chosen ids for that receiver,
    which is exactly a per-round crash pattern.
    """

    def __init__(self, seed: int, ids_per_round: int):
        self.seed = seed
        self.ids_per_round = ids_per_round

    def bind(self, cfg, ids):
        super().bind(cfg, ids)
        if self.ids_per_round > cfg.k:
            raise PreconditionFailed(
                f"cannot duplicate {self.ids_per_round} ids with budget k={cfg.k}"
            )
        self._rng = random.Random(mix_seed(self.seed, "spam"))

    def observe(self, round_no, broadcasts, inputs):
        forged = []
        for receiver in self.ids:
            victims = self._rng.sample(self.ids, self.ids_per_round)
            for victim in victims:
                forged.append(
                    Envelope(victim, receiver, broadcasts[victim], round_no, Origin.FORGED)
                )
        return forged


class RandomForger(AdversaryStrategy):
    """Stress strategy: per receiver, 0..k forgeries with random claimed ids.

    Payloads are drawn from the round's observed genuine payloads and, in
    mutate mode, perturbed field-by-field within the observed value alphabet,
    so encodings are always well-formed.
    """

    def __init__(self, seed: int, payload_mode: str = "replay"):
        if payload_mode not in ("replay", "mutate"):
            raise ValueError(f"unknown payload mode {payload_mode!r}")
        self.seed = seed
        self.payload_mode = payload_mode

    def bind(self, cfg, ids):
        super().bind(cfg, ids)
        self._rng = random.Random(mix_seed(self.seed, "forger"))

    def _mutate(self, payload: Payload, alphabets: dict) -> Payload:
        items = []
        for item in payload:
            fields = list(item[1:])
            for pos in range(len(fields)):
                if self._rng.random() < 0.5:
                    pool = alphabets.get((item[0], pos))
                    if pool:
                        fields[pos] = self._rng.choice(pool)
            items.append((item[0],) + tuple(fields))
        return canonical_payload(items)

    def observe(self, round_no, broadcasts, inputs):
        observed = [broadcasts[pid] for pid in self.ids]
        nonempty = [p for p in observed if p] or [()]
        alphabets: dict[tuple[str, int], list] = {}
        for payload in observed:
            for item in payload:
                for pos, value in enumerate(item[1:]):
                    pool = alphabets.setdefault((item[0], pos), [])
                    if value not in pool:
                        pool.append(value)
        forged = []
        for receiver in self.ids:
            count = self._rng.randint(0, self.cfg.k)
            for _ in range(count):
                claimed = self._rng.choice(self.ids)
                payload = self._rng.choice(nonempty)
                if self.payload_mode == "mutate":
                    payload = self._mutate(payload, alphabets)
                forged.append(Envelope(claimed, receiver, payload, round_no, Origin.FORGED))
        return forged


@dataclass(frozen=True)
class TwinSpec:
    target: ProcessorId
    alt_input: Any


@dataclass
class _Shadow:
    pid: ProcessorId
    alt_input: Any
    state: Any = None
    inbox_prev: RoundInbox = EMPTY_INBOX
    decision: Decision | None = None


class SybilTwinAdversary(AdversaryStrategy):
    """Runs protocol-faithful duplicates of chosen processors under stolen ids.

    Every shadow receives all genuine broadcasts plus every shadow broadcast
    (its own included), so each one behaves exactly like an additional
    participant in an enlarged symmetric run.
    """

    def __init__(self, twins: Sequence[TwinSpec], protocol):
        targets = [t.target for t in twins]
        if len(set(targets)) != len(targets):
            raise PreconditionFailed("twin targets must be distinct")
        self.twins = list(twins)
        self.protocol = protocol
        self.shadows = [_Shadow(t.target, t.alt_input) for t in twins]
        self._last_round = 0

    def bind(self, cfg, ids):
        super().bind(cfg, ids)
        if len(self.twins) > cfg.k:
            raise PreconditionFailed(f"{len(self.twins)} twins exceed budget k={cfg.k}")
        for twin in self.twins:
            if twin.target not in ids:
                raise PreconditionFailed(f"twin target {twin.target} is not a processor")

    def _advance(self, shadow: _Shadow, round_no: int) -> Payload:
        if round_no == 1:
            shadow.state = self.protocol.init(shadow.pid, shadow.alt_input)
        state, items, decision = self.protocol.step(shadow.state, round_no, shadow.inbox_prev)
        shadow.state = state
        if decision is not None and shadow.decision is None:
            shadow.decision = Decision(decision, round_no - 1)
        return canonical_payload(items)

    def observe(self, round_no, broadcasts, inputs):
        outboxes = [self._advance(shadow, round_no) for shadow in self.shadows]
        entries = [(pid, payload) for pid, payload in broadcasts.items()]
        entries += [(shadow.pid, out) for shadow, out in zip(self.shadows, outboxes)]
        entries.sort(key=lambda e: (e[0].index, payload_key(e[1])))
        inbox = RoundInbox(tuple(entries))
        for shadow in self.shadows:
            shadow.inbox_prev = inbox
        self._last_round = round_no
        forged = []
        for shadow, out in zip(self.shadows, outboxes):
            for receiver in self.ids:
                forged.append(Envelope(shadow.pid, receiver, out, round_no, Origin.FORGED))
        return forged

    def settled(self):
        return all(shadow.decision is not None for shadow in self.shadows)

    def finish(self):
        if self._last_round == 0:
            return
        for shadow in self.shadows:
            self._advance(shadow, self._last_round + 1)

    def shadow_decisions(self) -> list[tuple[TwinSpec, Decision | None]]:
        return [(twin, shadow.decision) for twin, shadow in zip(self.twins, self.shadows)]


def sybil_twin_adversary(twins: Sequence[TwinSpec], protocol) -> SybilTwinAdversary:
    return SybilTwinAdversary(twins, protocol)


def random_forger(seed: int, payload_mode: str = "replay") -> RandomForger:
    return RandomForger(seed, payload_mode)


def duplicate_spammer(seed: int, ids_per_round: int) -> DuplicateSpammer:
    return DuplicateSpammer(seed, ids_per_round)


class GraphAdversary(AdversaryStrategy):
    """Replays the single-impersonator behavior a communication graph encodes.

    Reconstructs every processor's state from the observed genuine traffic
    plus its own past injections, derives the shadow state from the graph's
    labels, and delivers the shadow's broadcast exactly along the graph's
    edges.  Independent of the direct graph interpreter on purpose: the two
    paths cross-check each other.
    """

    def __init__(self, graph: CommGraph, protocol):
        violations = validate_graph(graph)
        if violations:
            raise PreconditionFailed("; ".join(violations))
        self.graph = graph
        self.protocol = protocol

    def bind(self, cfg, ids):
        super().bind(cfg, ids)
        if cfg.n != self.graph.n:
            raise GraphMismatch(f"graph has n={self.graph.n}, engine has n={cfg.n}")
        if cfg.k != 1:
            raise GraphMismatch("communication graphs describe a budget-1 adversary")
        if cfg.max_rounds != self.graph.rounds:
            raise GraphMismatch(
                f"graph horizon {self.graph.rounds} != max_rounds {cfg.max_rounds}"
            )
        self._states = {pid: [None] for pid in ids}  # index r: state after step r
        self._inboxes = {pid: {} for pid in ids}
        self._outboxes = {pid: {} for pid in ids}
        self._shadow = {}    # r -> (state, payload) | None
        self._identity = {}  # r -> ProcessorId | None

    def _replica_step(self, pid: ProcessorId, round_no: int, inputs) -> None:
        if round_no == 1:
            self._states[pid][0] = self.protocol.init(pid, inputs[pid])
        prev_inbox = self._inboxes[pid].get(round_no - 1, EMPTY_INBOX)
        state, items, _ = self.protocol.step(self._states[pid][round_no - 1], round_no, prev_inbox)
        self._states[pid].append(state)
        self._outboxes[pid][round_no] = canonical_payload(items)

    def _inverse(self, pid: ProcessorId, r: int, inputs):
        if r == 1:
            flipped = 1 - inputs[pid]
            state = self.protocol.init(pid, flipped)
            new_state, items, _ = self.protocol.step(state, 1, EMPTY_INBOX)
            return new_state, canonical_payload(items)
        if self.graph.labels[r - 2] is None:
            return self._states[pid][r], self._outboxes[pid][r]
        claimed = self._identity[r - 1]
        payload = self._shadow[r - 1][1]
        entries = list(self._inboxes[pid][r - 1].entries)
        pair = (claimed, payload)
        if pair in entries:
            entries.remove(pair)
        else:
            entries.append(pair)
            entries.sort(key=lambda e: (e[0].index, payload_key(e[1])))
        toggled = RoundInbox(tuple(entries))
        new_state, items, _ = self.protocol.step(self._states[pid][r - 1], r, toggled)
        return new_state, canonical_payload(items)

    def observe(self, round_no, broadcasts, inputs):
        for pid in self.ids:
            self._replica_step(pid, round_no, inputs)
        label = self.graph.labels[round_no - 1]
        if label is None:
            self._shadow[round_no] = None
            self._identity[round_no] = None
        elif label == A_LABEL:
            ident = self._identity[round_no - 1]
            prev_state = self._shadow[round_no - 1][0]
            state, items, _ = self.protocol.step(
                prev_state, round_no, self._inboxes[ident][round_no - 1]
            )
            self._shadow[round_no] = (state, canonical_payload(items))
            self._identity[round_no] = ident
        else:
            ident = ProcessorId(label)
            self._shadow[round_no] = self._inverse(ident, round_no, inputs)
            self._identity[round_no] = ident

        forged = []
        if self._shadow[round_no] is not None:
            payload = self._shadow[round_no][1]
            for receiver in self.ids:
                if (round_no, receiver.index) in self.graph.edges:
                    forged.append(
                        Envelope(self._identity[round_no], receiver, payload, round_no, Origin.FORGED)
                    )
        # Record what every processor will have received this round.
        for receiver in self.ids:
            envs = [
                Envelope(src, receiver, broadcasts[src], round_no, Origin.GENUINE)
                for src in self.ids
            ]
            envs.extend(e for e in forged if e.receiver == receiver)
            self._inboxes[receiver][round_no] = RoundInbox.assemble(envs)
        return forged


def graph_adversary(graph: CommGraph, protocol) -> GraphAdversary:
    return GraphAdversary(graph, protocol)
