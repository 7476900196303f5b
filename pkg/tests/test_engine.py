import random

import pytest
from hypothesis import given, strategies as st

from impersim.adversaries import ScriptedAdversary, null_adversary, random_forger
from impersim.engine import (
    Engine,
    EngineConfig,
    enforce_budget,
    mix_seed,
    replay_decisions,
    run_protocol,
    trace_lines,
    parse_trace,
    validate_config,
)
from impersim.errors import BudgetError, ConfigError
from impersim.messages import Envelope, Origin, ProcessorId, canonical_payload
from impersim.protocols import (
    BenOrProtocol,
    FullInfoProtocol,
    RenamingProtocol,
    SetAgreementProtocol,
)


def test_validate_config_examples():
    validate_config(EngineConfig(9, 2, 15), "renaming")
    with pytest.raises(ConfigError):
        validate_config(EngineConfig(0, 0, 1))
    with pytest.raises(ConfigError):
        validate_config(EngineConfig(4, 2, 10), "ben_or")
    with pytest.raises(ConfigError):
        validate_config(EngineConfig(8, 2, 14), "renaming")
    # weaker bound available behind the explicit override
    validate_config(EngineConfig(7, 2, 13), "renaming", weak_renaming_bound=True)
    with pytest.raises(ConfigError):
        validate_config(EngineConfig(6, 2, 12), "renaming", weak_renaming_bound=True)
    with pytest.raises(ConfigError):
        validate_config(EngineConfig(6, 2, 2), "set_agreement", value_domain_size=3)
    validate_config(EngineConfig(7, 2, 2), "set_agreement", value_domain_size=3)


def _forged(receiver, count, k=1):
    payload = canonical_payload([("INPUT", 0)])
    return [
        Envelope(ProcessorId(1), ProcessorId(receiver), payload, 1, Origin.FORGED)
        for _ in range(count)
    ]


def test_enforce_budget_examples():
    cfg = EngineConfig(3, 1, 5)
    enforce_budget(_forged(1, 1), cfg)
    with pytest.raises(BudgetError) as err:
        enforce_budget(_forged(1, 2), cfg)
    assert err.value.receiver == ProcessorId(1)
    assert err.value.count == 2
    cfg2 = EngineConfig(3, 2, 5)
    batch = [e for r in (1, 2, 3) for e in _forged(r, 2)]
    enforce_budget(batch, cfg2)


@given(st.lists(st.tuples(st.integers(1, 5), st.integers(1, 4)), max_size=8))
def test_enforce_budget_property(spec):
    cfg = EngineConfig(5, 2, 5)
    batch = [e for receiver, count in spec for e in _forged(receiver, count)]
    per_receiver: dict[int, int] = {}
    for receiver, count in spec:
        per_receiver[receiver] = per_receiver.get(receiver, 0) + count
    if all(c <= cfg.k for c in per_receiver.values()):
        enforce_budget(batch, cfg)
    else:
        with pytest.raises(BudgetError):
            enforce_budget(batch, cfg)


def test_run_round_inbox_sizes():
    cfg = EngineConfig(3, 1, 5, seed=1)
    engine = Engine(cfg, FullInfoProtocol(), [0, 1, 0], null_adversary())
    engine.run_round()
    assert all(len(engine.inboxes[pid]) == 3 for pid in engine.ids)

    script = [(1, ProcessorId(1), ProcessorId(2), [("VIEW", 1, ())])]
    engine = Engine(cfg, FullInfoProtocol(), [0, 1, 0], ScriptedAdversary(script))
    engine.run_round()
    sizes = {pid.tag: len(engine.inboxes[pid]) for pid in engine.ids}
    assert sizes == {"p_1": 4, "p_2": 3, "p_3": 3}


def test_determinism_byte_identical_traces():
    def once():
        cfg = EngineConfig(5, 2, 10, seed=77)
        res = run_protocol(
            cfg,
            RenamingProtocol(5, 2),
            [3, 1, 4, 5, 9],
            random_forger(mix_seed(77, "adv"), "mutate"),
        )
        return "\n".join(trace_lines(res.trace))

    assert once() == once()


def test_over_budget_strategy_rejected_mid_run():
    class Greedy(ScriptedAdversary):
        def observe(self, round_no, broadcasts, inputs):
            payload = [("VIEW", 0, ())]
            return [
                Envelope(ProcessorId(1), ProcessorId(1), canonical_payload(payload), round_no, Origin.FORGED)
                for _ in range(self.cfg.k + 1)
            ]

    cfg = EngineConfig(3, 1, 3, seed=0)
    with pytest.raises(BudgetError):
        run_protocol(cfg, FullInfoProtocol(), [0, 0, 0], Greedy([]))


def _run_decisions(protocol_factory, n, k, inputs, max_rounds, seed=5):
    cfg = EngineConfig(n, k, max_rounds, seed=seed)
    res = run_protocol(cfg, protocol_factory(), inputs, null_adversary())
    return {pid: (d.value, d.round_no) for pid, d in res.decisions.items()}


@pytest.mark.parametrize("case", ["renaming", "set_agreement", "ben_or"])
def test_id_permutation_equivariance(case):
    rng = random.Random(42)
    if case == "renaming":
        n, k, max_rounds = 6, 1, 11
        inputs = [30, 11, 25, 78, 2, 40]
        factory = lambda: RenamingProtocol(n, k)
    elif case == "set_agreement":
        n, k, max_rounds = 7, 2, 2
        inputs = [0, 1, 2, 1, 1, 0, 2]
        factory = lambda: SetAgreementProtocol(n, k, (0, 1, 2))
    else:
        n, k, max_rounds = 5, 2, 20
        inputs = [0, 1, 1, 0, 1]
        factory = lambda: BenOrProtocol(n, k, seed=9)
    base = _run_decisions(factory, n, k, inputs, max_rounds)
    for _ in range(10):
        perm = list(range(1, n + 1))
        rng.shuffle(perm)
        permuted_inputs = [None] * n
        for i in range(1, n + 1):
            permuted_inputs[perm[i - 1] - 1] = inputs[i - 1]
        other = _run_decisions(factory, n, k, permuted_inputs, max_rounds)
        for i in range(1, n + 1):
            assert other[ProcessorId(perm[i - 1])] == base[ProcessorId(i)]


def test_origin_opacity_shuffled_inbox():
    calls = []

    class Recording(RenamingProtocol):
        def step(self, state, round_no, inbox):
            calls.append((state, round_no, inbox))
            return super().step(state, round_no, inbox)

    protocol = Recording(5, 2)
    cfg = EngineConfig(5, 2, 11, seed=3)
    run_protocol(cfg, protocol, [9, 4, 6, 1, 8], random_forger(mix_seed(3, "a"), "mutate"))
    rng = random.Random(0)
    reference = RenamingProtocol(5, 2)
    for state, round_no, inbox in calls[:200]:
        entries = list(inbox.entries)
        rng.shuffle(entries)
        shuffled = type(inbox)(tuple(entries))
        expected = reference.step(state, round_no, inbox)
        got = reference.step(state, round_no, shuffled)
        assert got[0] == expected[0]
        assert canonical_payload(got[1]) == canonical_payload(expected[1])
        assert got[2] == expected[2]


def test_trace_roundtrip_and_replay():
    cfg = EngineConfig(5, 2, 11, seed=21)
    protocol = RenamingProtocol(5, 2)
    inputs = [12, 7, 30, 4, 19]
    res = run_protocol(cfg, protocol, inputs, random_forger(mix_seed(21, "adv")))
    lines = trace_lines(res.trace)
    parsed = parse_trace(lines)
    assert trace_lines(parsed) == lines
    replayed = replay_decisions(RenamingProtocol(5, 2), inputs, parsed)
    assert replayed == res.decisions


def test_non_termination_reported_not_raised():
    cfg = EngineConfig(3, 0, 4, seed=0)
    res = run_protocol(cfg, FullInfoProtocol(), [0, 1, 0], null_adversary())
    assert res.non_termination
    assert res.undecided == frozenset(ProcessorId(i) for i in (1, 2, 3))
