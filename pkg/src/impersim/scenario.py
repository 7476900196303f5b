"""Scenario files, run orchestration, per-protocol property verdicts.

A scenario is a JSON object with a schema version; unknown fields are
rejected outright.  Running a scenario wires together config validation,
protocol and adversary construction, engine execution, and the evaluation
of every invariant the chosen protocol promises.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from random import Random
from typing import Any

from . import adversaries as adv
from .chainlab import CommGraph
from .engine import (
    Decision,
    EngineConfig,
    RunResult,
    TraceEvent,
    mix_seed,
    run_protocol,
    validate_config,
)
from .errors import ConfigError, ProtocolInvariantError
from .messages import ProcessorId, processor_ids
from .protocols import BenOrProtocol, RenamingProtocol, SetAgreementProtocol

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema",
    "protocol",
    "n",
    "k",
    "seed",
    "inputs",
    "input_dist",
    "value_domain",
    "adversary",
    "max_rounds",
    "max_phases",
    "weak_bound",
    "fault",
}

_ADVERSARY_KEYS = {
    "null": set(),
    "sybil_twin": {"twins"},
    "random_forger": {"mode"},
    "duplicate_spammer": {"ids_per_round"},
    "graph": {"path"},
}

PROTOCOL_KINDS = ("renaming", "set_agreement", "ben_or")


@dataclass(frozen=True)
class ScenarioConfig:
    protocol: str
    n: int
    k: int
    seed: int
    inputs: tuple | None = None
    input_dist: dict | None = None
    value_domain: tuple | None = None
    adversary: dict = field(default_factory=lambda: {"kind": "null"})
    max_rounds: int | None = None
    max_phases: int | None = None
    weak_bound: bool = False
    fault: str | None = None


def _require(data: dict, key: str):
    if key not in data:
        raise ConfigError(key, "required")
    return data[key]


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> ScenarioConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    if _require(data, "schema") != SCHEMA_VERSION:
        raise ConfigError("schema", f"expected version {SCHEMA_VERSION}")
    protocol = _require(data, "protocol")
    if protocol not in PROTOCOL_KINDS:
        raise ConfigError("protocol", f"must be one of {PROTOCOL_KINDS}")
    n = _require(data, "n")
    k = _require(data, "k")
    seed = _require(data, "seed")
    for name, value in (("n", n), ("k", k), ("seed", seed)):
        if not isinstance(value, int):
            raise ConfigError(name, "must be an integer")

    inputs = data.get("inputs")
    input_dist = data.get("input_dist")
    if (inputs is None) == (input_dist is None):
        raise ConfigError("inputs", "exactly one of inputs / input_dist is required")
    if inputs is not None:
        if len(inputs) != n:
            raise ConfigError("inputs", f"expected {n} values, got {len(inputs)}")
        inputs = tuple(inputs)
    else:
        dist = input_dist.get("uniform") if isinstance(input_dist, dict) else None
        if not isinstance(dist, dict) or set(dist) != {"low", "high"}:
            raise ConfigError("input_dist", 'expected {"uniform": {"low": .., "high": ..}}')

    value_domain = data.get("value_domain")
    if protocol == "set_agreement":
        if value_domain is None:
            raise ConfigError("value_domain", "required for set agreement")
        value_domain = tuple(value_domain)
    elif value_domain is not None:
        raise ConfigError("value_domain", f"not applicable to {protocol}")

    adversary = dict(data.get("adversary", {"kind": "null"}))
    kind = adversary.get("kind")
    if kind not in _ADVERSARY_KEYS:
        raise ConfigError("adversary.kind", f"must be one of {sorted(_ADVERSARY_KEYS)}")
    extra = set(adversary) - _ADVERSARY_KEYS[kind] - {"kind"}
    if extra:
        raise ConfigError(f"adversary.{sorted(extra)[0]}", "unknown field")
    if kind == "graph" and base_dir is not None:
        adversary["path"] = str((base_dir / adversary["path"]).resolve())

    cfg = ScenarioConfig(
        protocol=protocol,
        n=n,
        k=k,
        seed=seed,
        inputs=inputs,
        input_dist=input_dist,
        value_domain=value_domain,
        adversary=adversary,
        max_rounds=data.get("max_rounds"),
        max_phases=data.get("max_phases"),
        weak_bound=bool(data.get("weak_bound", False)),
        fault=data.get("fault"),
    )
    validate_scenario(cfg)
    return cfg


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("file", f"invalid JSON: {exc}") from exc
    return scenario_from_dict(data, base_dir=path.parent)


def validate_scenario(sc: ScenarioConfig) -> None:
    engine_cfg = engine_config(sc)
    validate_config(
        engine_cfg,
        sc.protocol,
        value_domain_size=len(sc.value_domain) if sc.value_domain else None,
        weak_renaming_bound=sc.weak_bound,
    )
    if sc.adversary["kind"] == "sybil_twin":
        twins = sc.adversary.get("twins", [])
        if len(twins) > sc.k:
            raise ConfigError("adversary.twins", f"at most k={sc.k} twins allowed")
    if sc.adversary["kind"] == "duplicate_spammer":
        if sc.adversary.get("ids_per_round", sc.k) > sc.k:
            raise ConfigError("adversary.ids_per_round", f"budget is k={sc.k}")
    if sc.inputs is not None and sc.protocol == "renaming":
        if len(set(sc.inputs)) != sc.n:
            raise ConfigError("inputs", "renaming inputs must be distinct")
    if sc.inputs is not None and sc.protocol == "ben_or":
        if any(v not in (0, 1) for v in sc.inputs):
            raise ConfigError("inputs", "consensus inputs must be binary")
    if sc.inputs is not None and sc.protocol == "set_agreement":
        if any(v not in sc.value_domain for v in sc.inputs):
            raise ConfigError("inputs", "inputs must come from value_domain")


def engine_config(sc: ScenarioConfig) -> EngineConfig:
    if sc.max_rounds is not None:
        horizon = sc.max_rounds
    elif sc.protocol == "renaming":
        horizon = sc.n + sc.k + 4
    elif sc.protocol == "set_agreement":
        horizon = 2
    else:
        horizon = 2 * (sc.max_phases or 60)
    return EngineConfig(n=sc.n, k=sc.k, max_rounds=horizon, seed=sc.seed)


def materialize_inputs(sc: ScenarioConfig) -> tuple:
    if sc.inputs is not None:
        return sc.inputs
    dist = sc.input_dist["uniform"]
    rng = Random(mix_seed(sc.seed, "inputs"))
    lo, hi = dist["low"], dist["high"]
    domain = list(range(lo, hi + 1))
    if sc.protocol == "renaming":
        if len(domain) < sc.n:
            raise ConfigError("input_dist", "domain smaller than n for renaming")
        return tuple(sorted(rng.sample(domain, sc.n)))
    if sc.protocol == "set_agreement":
        pool = [v for v in domain if v in sc.value_domain]
        if not pool:
            raise ConfigError("input_dist", "domain disjoint from value_domain")
        return tuple(rng.choice(pool) for _ in range(sc.n))
    return tuple(rng.choice((0, 1)) for _ in range(sc.n))


def build_protocol(sc: ScenarioConfig):
    if sc.protocol == "renaming":
        return RenamingProtocol(sc.n, sc.k, skip_round2_echo=sc.fault == "skip_round2_echo")
    if sc.protocol == "set_agreement":
        return SetAgreementProtocol(sc.n, sc.k, sc.value_domain)
    return BenOrProtocol(sc.n, sc.k, sc.seed, max_phases=sc.max_phases or 60)


def build_adversary(sc: ScenarioConfig, protocol):
    spec = sc.adversary
    kind = spec["kind"]
    if kind == "null":
        return adv.null_adversary()
    if kind == "random_forger":
        return adv.random_forger(mix_seed(sc.seed, "adversary"), spec.get("mode", "replay"))
    if kind == "duplicate_spammer":
        return adv.duplicate_spammer(
            mix_seed(sc.seed, "adversary"), spec.get("ids_per_round", sc.k)
        )
    if kind == "sybil_twin":
        twins = []
        for target, alt in spec.get("twins", []):
            index = int(target[2:]) if isinstance(target, str) else int(target)
            twins.append(adv.TwinSpec(ProcessorId(index), alt))
        return adv.sybil_twin_adversary(twins, protocol)
    graph = CommGraph.from_json(json.loads(Path(spec["path"]).read_text()))
    return adv.graph_adversary(graph, protocol)


@dataclass
class RunReport:
    scenario: ScenarioConfig
    inputs: tuple
    decisions: dict[ProcessorId, Decision]
    twin_decisions: list
    verdicts: dict[str, bool]
    details: dict[str, str]
    non_termination: bool
    rounds: int
    trace: list[TraceEvent]
    wall_time: float

    @property
    def all_pass(self) -> bool:
        return all(self.verdicts.values())

    def summary(self) -> dict:
        return {
            "protocol": self.scenario.protocol,
            "decisions": {
                pid.tag: {"value": d.value, "round": d.round_no}
                for pid, d in sorted(self.decisions.items())
            },
            "twin_decisions": [
                {
                    "target": twin.target.tag,
                    "alt_input": twin.alt_input,
                    "value": d.value if d else None,
                    "round": d.round_no if d else None,
                }
                for twin, d in self.twin_decisions
            ],
            "verdicts": dict(sorted(self.verdicts.items())),
            "non_termination": self.non_termination,
            "rounds": self.rounds,
            "wall_time_s": round(self.wall_time, 4),
        }


def _renaming_checks(sc, inputs, result, snapshots, verdicts, details):
    n, k = sc.n, sc.k
    decided = result.decisions
    verdicts["decided_all"] = len(decided) == n and all(
        d.round_no <= n + k + 3 for d in decided.values()
    )
    names = [d.value for d in decided.values()]
    verdicts["names_distinct"] = len(set(names)) == len(names) and len(names) == n
    verdicts["names_in_range"] = all(1 <= v <= n + k for v in names)
    order_ok = True
    for a in decided:
        for b in decided:
            if inputs[a.index - 1] < inputs[b.index - 1]:
                if not decided[a].value < decided[b].value:
                    order_ok = False
    verdicts["order_preserving"] = order_ok

    size_ok = genuine_ok = propagation_ok = window_ok = True
    genuine_pairs = {(pid, inputs[pid.index - 1]) for pid in processor_ids(n)}
    for r in sorted(snapshots):
        for pid, state in snapshots[r].items():
            if len(state.pairs) > n + k:
                size_ok = False
                details.setdefault("v_size_bound", f"|V|={len(state.pairs)} at round {r}")
            if r >= 3:
                if not genuine_pairs <= state.pairs:
                    genuine_ok = False
                # Undecided at the end of round r implies the own rank already
                # exceeds the decision slot of that round.
                slot = r - 3
                if state.decided is None and slot >= 1 and state.rank_prev <= slot:
                    window_ok = False
        if r >= 3 and r + 1 in snapshots:
            union = set()
            for state in snapshots[r].values():
                union |= state.pairs
            for state in snapshots[r + 1].values():
                if not union <= state.pairs:
                    propagation_ok = False
    verdicts["v_size_bound"] = size_ok
    verdicts["genuine_pairs_round3"] = genuine_ok and 3 in snapshots
    verdicts["v_propagation"] = propagation_ok
    verdicts["decide_window"] = window_ok


def _set_agreement_checks(sc, inputs, result, snapshots, verdicts, details):
    k = sc.k
    decided = result.decisions
    verdicts["decided_all"] = len(decided) == sc.n
    values = {d.value for d in decided.values()}
    verdicts["decision_set_bound"] = len(values) <= k + 1
    verdicts["validity"] = values <= set(inputs)
    last = max(snapshots) if snapshots else 0
    final = snapshots.get(last, {})
    verdicts["m_nonempty"] = bool(final) and all(s.chosen for s in final.values())
    common = {v for v in set(inputs) if sum(1 for x in inputs if x == v) >= k + 1}
    verdicts["common_value_in_all_m"] = all(
        common <= s.chosen for s in final.values()
    )


def _ben_or_checks(sc, inputs, result, snapshots, verdicts, details):
    decided = result.decisions
    values = {d.value for d in decided.values()}
    verdicts["agreement"] = len(values) <= 1
    verdicts["validity"] = values <= set(inputs)
    stable = True
    seen: dict[ProcessorId, Any] = {}
    for r in sorted(snapshots):
        for pid, state in snapshots[r].items():
            if pid in seen and seen[pid] is not None:
                if state.decided != seen[pid] or state.x != seen[pid]:
                    stable = False
            if state.decided is not None:
                seen[pid] = state.decided
    verdicts["decision_stability"] = stable


_CHECKERS = {
    "renaming": _renaming_checks,
    "set_agreement": _set_agreement_checks,
    "ben_or": _ben_or_checks,
}


def run_scenario(sc: ScenarioConfig) -> RunReport:
    started = time.perf_counter()
    inputs = materialize_inputs(sc)
    protocol = build_protocol(sc)
    adversary = build_adversary(sc, protocol)
    cfg = engine_config(sc)
    snapshots: dict[int, dict[ProcessorId, Any]] = {}

    def on_round_end(round_no, states):
        snapshots[round_no] = states

    verdicts: dict[str, bool] = {}
    details: dict[str, str] = {}
    twin_decisions: list = []
    try:
        result = run_protocol(cfg, protocol, inputs, adversary, on_round_end)
        verdicts["protocol_invariants"] = True
    except ProtocolInvariantError as exc:
        result = RunResult({}, [], frozenset(), 0)
        verdicts["protocol_invariants"] = False
        details["protocol_invariants"] = str(exc)
    else:
        _CHECKERS[sc.protocol](sc, inputs, result, snapshots, verdicts, details)
        if isinstance(adversary, adv.SybilTwinAdversary):
            twin_decisions = adversary.shadow_decisions()
    non_termination = result.non_termination
    if sc.protocol == "ben_or":
        # Termination is probabilistic; report it, do not fail the run.
        verdicts.pop("decided_all", None)
    return RunReport(
        scenario=sc,
        inputs=inputs,
        decisions=result.decisions,
        twin_decisions=twin_decisions,
        verdicts=verdicts,
        details=details,
        non_termination=non_termination,
        rounds=result.rounds_delivered,
        trace=result.trace,
        wall_time=time.perf_counter() - started,
    )


def monte_carlo(sc: ScenarioConfig, runs: int, seed_base: int) -> dict:
    """Sequential seeded campaign; the aggregate is a pure function of the seeds."""
    if runs < 1:
        raise ConfigError("runs", "must be >= 1")
    failures = []
    non_terminations = 0
    decision_hist: dict[Any, int] = {}
    decision_set_sizes = []
    rounds_used = []
    for offset in range(runs):
        seed = seed_base + offset
        report = run_scenario(replace(sc, seed=seed))
        if not report.all_pass:
            failed = sorted(k for k, v in report.verdicts.items() if not v)
            failures.append({"seed": seed, "verdicts": failed})
        if report.non_termination:
            non_terminations += 1
        values = [d.value for d in report.decisions.values()]
        for v in values:
            decision_hist[v] = decision_hist.get(v, 0) + 1
        decision_set_sizes.append(len(set(values)))
        rounds_used.append(report.rounds)
    return {
        "runs": runs,
        "seed_base": seed_base,
        "failures": failures,
        "non_terminations": non_terminations,
        "decision_histogram": {str(k): v for k, v in sorted(decision_hist.items())},
        "max_decision_set_size": max(decision_set_sizes),
        "mean_rounds": sum(rounds_used) / len(rounds_used),
        "max_rounds": max(rounds_used),
    }
