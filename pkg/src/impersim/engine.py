"""Deterministic synchronous round engine.

Every round, every processor's broadcast is delivered to every processor
(including itself); the adversary observes the round's genuine traffic first
(rushing) and may add up to k forged envelopes per receiver.  Protocol
transitions are pure: ``step(state, r, inbox)`` consumes the round-(r-1)
inbox (empty for r=1), returns the round-r broadcast, and reports a decision
made at the end of round r-1.  After the last delivered round the engine
makes one flushing step call so end-of-final-round decisions are recorded.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Sequence

from .errors import BudgetError, ConfigError, EngineInvariantError
from .messages import (
    EMPTY_INBOX,
    Envelope,
    Origin,
    Payload,
    ProcessorId,
    RoundInbox,
    canonical_payload,
    decode_payload,
    encode_payload,
    processor_ids,
    sort_envelopes,
)


def mix_seed(*parts: Any) -> int:
    """Derive a stable 64-bit child seed from arbitrary labeled parts."""
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class EngineConfig:
    n: int
    k: int
    max_rounds: int
    seed: int = 0


def validate_config(
    cfg: EngineConfig,
    protocol_kind: str | None = None,
    *,
    value_domain_size: int | None = None,
    weak_renaming_bound: bool = False,
) -> None:
    """Reject parameter combinations outside the chosen protocol's precondition."""
    if cfg.n < 1:
        raise ConfigError("n", f"must be >= 1, got {cfg.n}")
    if cfg.k < 0:
        raise ConfigError("k", f"must be >= 0, got {cfg.k}")
    if cfg.max_rounds < 1:
        raise ConfigError("max_rounds", f"must be >= 1, got {cfg.max_rounds}")
    if protocol_kind is None:
        return
    n, k = cfg.n, cfg.k
    if protocol_kind == "renaming":
        bound = k * k + k if weak_renaming_bound else k * k + 2 * k
        name = "n > k^2 + k" if weak_renaming_bound else "n > k^2 + 2k"
        if n <= bound:
            raise ConfigError("n", f"renaming requires {name}; n={n}, k={k}")
    elif protocol_kind == "ben_or":
        if n <= 2 * k:
            raise ConfigError("n", f"randomized consensus requires n > 2k; n={n}, k={k}")
    elif protocol_kind == "set_agreement":
        if value_domain_size is None:
            raise ConfigError("value_domain", "required for set agreement")
        if n <= value_domain_size * k:
            raise ConfigError(
                "n", f"set agreement requires n > |V|k; n={n}, |V|={value_domain_size}, k={k}"
            )
    elif protocol_kind not in ("full_info", "majority_strawman"):
        raise ConfigError("protocol", f"unknown protocol kind {protocol_kind!r}")


def enforce_budget(forged: Sequence[Envelope], cfg: EngineConfig) -> None:
    """Check the per-receiver forgery budget for one round's injections."""
    rounds = {e.round_no for e in forged}
    if len(rounds) > 1:
        raise EngineInvariantError(f"forged envelopes span several rounds: {sorted(rounds)}")
    counts: dict[ProcessorId, int] = {}
    for env in forged:
        if env.origin is not Origin.FORGED:
            raise EngineInvariantError("adversary emitted a non-forged envelope")
        counts[env.receiver] = counts.get(env.receiver, 0) + 1
    for receiver in sorted(counts):
        if counts[receiver] > cfg.k:
            raise BudgetError(receiver, counts[receiver], cfg.k)


@dataclass(frozen=True)
class TraceDelivery:
    round_no: int
    receiver: ProcessorId
    claimed_sender: ProcessorId
    forged: bool
    payload: Payload


@dataclass(frozen=True)
class TraceDecision:
    round_no: int
    pid: ProcessorId
    value: Any


TraceEvent = TraceDelivery | TraceDecision


@dataclass(frozen=True)
class Decision:
    value: Any
    round_no: int


@dataclass
class RunResult:
    decisions: dict[ProcessorId, Decision]
    trace: list[TraceEvent]
    undecided: frozenset[ProcessorId]
    rounds_delivered: int

    @property
    def non_termination(self) -> bool:
        return bool(self.undecided)


class Engine:
    """One self-contained run; owns its seed and all mutable state."""

    def __init__(
        self,
        cfg: EngineConfig,
        protocol,
        inputs: Sequence[Any],
        adversary,
        on_round_end: Callable[[int, dict[ProcessorId, Any]], None] | None = None,
    ):
        if len(inputs) != cfg.n:
            raise ConfigError("inputs", f"expected {cfg.n} values, got {len(inputs)}")
        self.cfg = cfg
        self.protocol = protocol
        self.ids = processor_ids(cfg.n)
        self.inputs = {pid: inputs[pid.index - 1] for pid in self.ids}
        self.adversary = adversary
        self.on_round_end = on_round_end
        self.states = {pid: protocol.init(pid, self.inputs[pid]) for pid in self.ids}
        self.inboxes: dict[ProcessorId, RoundInbox] = {pid: EMPTY_INBOX for pid in self.ids}
        self.decisions: dict[ProcessorId, Decision] = {}
        self.trace: list[TraceEvent] = []
        self.round = 0  # last fully delivered round
        adversary.bind(cfg, self.ids)

    def _step_phase(self, round_no: int) -> dict[ProcessorId, Payload]:
        """Advance every processor by one step; returns the round's broadcasts."""
        outboxes: dict[ProcessorId, Payload] = {}
        for pid in self.ids:
            state, items, decision = self.protocol.step(self.states[pid], round_no, self.inboxes[pid])
            self.states[pid] = state
            outboxes[pid] = canonical_payload(items)
            if decision is not None and pid not in self.decisions:
                self.decisions[pid] = Decision(decision, round_no - 1)
                self.trace.append(TraceDecision(round_no - 1, pid, decision))
        if self.on_round_end is not None and round_no > 1:
            self.on_round_end(round_no - 1, dict(self.states))
        return outboxes

    def _deliver(self, round_no: int, outboxes: dict[ProcessorId, Payload]) -> None:
        genuine = [
            Envelope(src, recv, outboxes[src], round_no, Origin.GENUINE)
            for src in self.ids
            for recv in self.ids
        ]
        forged = [
            replace(env, payload=canonical_payload(env.payload))
            for env in self.adversary.observe(round_no, dict(outboxes), dict(self.inputs))
        ]
        for env in forged:
            if env.round_no != round_no:
                raise EngineInvariantError(
                    f"forged envelope for round {env.round_no} during round {round_no}"
                )
        enforce_budget(forged, self.cfg)
        by_receiver: dict[ProcessorId, list[Envelope]] = {pid: [] for pid in self.ids}
        for env in genuine:
            by_receiver[env.receiver].append(env)
        for env in forged:
            by_receiver[env.receiver].append(env)
        for recv in self.ids:
            envs = sort_envelopes(by_receiver[recv])
            senders = [e.claimed_sender for e in envs if not e.forged]
            if sorted(senders) != list(self.ids):
                raise EngineInvariantError(f"genuine broadcasts incomplete for {recv}")
            self.inboxes[recv] = RoundInbox(tuple((e.claimed_sender, e.payload) for e in envs))
            for env in envs:
                self.trace.append(
                    TraceDelivery(round_no, recv, env.claimed_sender, env.forged, env.payload)
                )
        self.round = round_no

    def run_round(self) -> None:
        """Execute one full round: step phase, rushing adversary, delivery."""
        if self.round >= self.cfg.max_rounds:
            raise EngineInvariantError("run_round past max_rounds")
        round_no = self.round + 1
        outboxes = self._step_phase(round_no)
        self._deliver(round_no, outboxes)

    def _flush(self) -> None:
        self._step_phase(self.cfg.max_rounds + 1)

    def _all_decided(self) -> bool:
        return len(self.decisions) == self.cfg.n and self.adversary.settled()

    def run(self) -> RunResult:
        """Run rounds until the horizon, or stop once every participant decided."""
        early = False
        while self.round < self.cfg.max_rounds:
            round_no = self.round + 1
            outboxes = self._step_phase(round_no)
            if self._all_decided():
                early = True
                break
            self._deliver(round_no, outboxes)
        if not early:
            self._flush()
        self.adversary.finish()
        undecided = frozenset(pid for pid in self.ids if pid not in self.decisions)
        return RunResult(dict(self.decisions), list(self.trace), undecided, self.round)


def run_protocol(
    cfg: EngineConfig,
    protocol,
    inputs: Sequence[Any],
    adversary,
    on_round_end: Callable[[int, dict[ProcessorId, Any]], None] | None = None,
) -> RunResult:
    return Engine(cfg, protocol, inputs, adversary, on_round_end).run()


def trace_lines(trace: Iterable[TraceEvent]) -> list[str]:
    """Render a trace as canonical JSONL with stable key order."""

    def key(event: TraceEvent):
        if isinstance(event, TraceDelivery):
            return (
                event.round_no,
                0,
                event.receiver.index,
                event.claimed_sender.index,
                json.dumps(encode_payload(event.payload)),
                event.forged,
            )
        return (event.round_no, 1, event.pid.index, 0, "", False)

    lines = []
    for event in sorted(trace, key=key):
        if isinstance(event, TraceDelivery):
            record = {
                "round": event.round_no,
                "recv": event.receiver.tag,
                "src": event.claimed_sender.tag,
                "forged": event.forged,
                "payload": encode_payload(event.payload),
            }
        else:
            record = {
                "decide": {"id": event.pid.tag, "value": event.value, "round": event.round_no}
            }
        lines.append(json.dumps(record, separators=(",", ":")))
    return lines


def emit_trace(trace: Iterable[TraceEvent], path) -> None:
    with open(path, "w") as fh:
        for line in trace_lines(trace):
            fh.write(line + "\n")


def parse_trace(lines: Iterable[str]) -> list[TraceEvent]:
    events: list[TraceEvent] = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        if "decide" in record:
            d = record["decide"]
            events.append(
                TraceDecision(d["round"], ProcessorId(int(d["id"][2:])), d["value"])
            )
        else:
            events.append(
                TraceDelivery(
                    record["round"],
                    ProcessorId(int(record["recv"][2:])),
                    ProcessorId(int(record["src"][2:])),
                    record["forged"],
                    decode_payload(record["payload"]),
                )
            )
    return events


def load_trace(path) -> list[TraceEvent]:
    with open(path) as fh:
        return parse_trace(fh)


def replay_decisions(
    protocol, inputs: Sequence[Any], trace: Sequence[TraceEvent]
) -> dict[ProcessorId, Decision]:
    """Re-run the protocol against a recorded trace's deliveries.

    Replaying must reproduce the original run's decisions bit-exactly; the
    trace fully determines the run.
    """
    deliveries = [e for e in trace if isinstance(e, TraceDelivery)]
    if not deliveries:
        return {}
    last_round = max(e.round_no for e in deliveries)
    ids = sorted({e.receiver for e in deliveries})
    per_round: dict[tuple[ProcessorId, int], list[TraceDelivery]] = {}
    for e in deliveries:
        per_round.setdefault((e.receiver, e.round_no), []).append(e)
    decisions: dict[ProcessorId, Decision] = {}
    for pid in ids:
        state = protocol.init(pid, inputs[pid.index - 1])
        inbox = EMPTY_INBOX
        for round_no in range(1, last_round + 2):
            state, _, decision = protocol.step(state, round_no, inbox)
            if decision is not None and pid not in decisions:
                decisions[pid] = Decision(decision, round_no - 1)
            if round_no <= last_round:
                envs = [
                    Envelope(
                        e.claimed_sender,
                        e.receiver,
                        e.payload,
                        e.round_no,
                        Origin.FORGED if e.forged else Origin.GENUINE,
                    )
                    for e in per_round.get((pid, round_no), [])
                ]
                inbox = RoundInbox.assemble(envs)
    return decisions
