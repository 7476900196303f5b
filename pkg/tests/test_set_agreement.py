import itertools

import pytest

from impersim.adversaries import (
    ScriptedAdversary,
    TwinSpec,
    null_adversary,
    random_forger,
    sybil_twin_adversary,
)
from impersim.engine import EngineConfig, mix_seed, run_protocol
from impersim.errors import EmptyM, NoQualifyingValue
from impersim.messages import ProcessorId
from impersim.protocols import SetAgreementProtocol, boost_participants
from impersim.protocols.set_agreement import KIND_VALUE


def _decisions(res):
    return {p: d.value for p, d in res.decisions.items()}


def test_no_adversary_minimum_input_wins():
    cfg = EngineConfig(3, 0, 2, seed=0)
    res = run_protocol(cfg, SetAgreementProtocol(3, 0, (1, 2)), [2, 1, 2], null_adversary())
    assert _decisions(res) == {ProcessorId(i): 1 for i in (1, 2, 3)}
    assert all(d.round_no == 2 for d in res.decisions.values())


def test_single_forgery_known_outcome():
    # Hand-derived: inputs (0,1,1), one forged (claimed p_3, value 0) to p_1.
    # Only p_1 sees two distinct ids for 0, so only p_1 echoes 0; that echo
    # reaches nobody n times, while echo(1) comes from everyone: all decide 1.
    protocol = SetAgreementProtocol(3, 1, (0, 1))
    script = [(1, ProcessorId(1), ProcessorId(3), [(KIND_VALUE, 0)])]
    cfg = EngineConfig(3, 1, 2, seed=0)
    res = run_protocol(cfg, protocol, [0, 1, 1], ScriptedAdversary(script))
    assert set(_decisions(res).values()) == {1}


def test_exhaustive_single_forgery_enumeration():
    # All 8 input vectors x all round-1 forgery targets, claimed ids, values.
    n, k, domain = 3, 1, (0, 1)
    for inputs in itertools.product(domain, repeat=n):
        for receiver, claimed, value in itertools.product(range(1, 4), range(1, 4), domain):
            script = [(1, ProcessorId(receiver), ProcessorId(claimed), [(KIND_VALUE, value)])]
            cfg = EngineConfig(n, k, 2, seed=0)
            res = run_protocol(
                cfg, SetAgreementProtocol(n, k, domain), list(inputs), ScriptedAdversary(script)
            )
            decided = _decisions(res)
            assert len(decided) == n
            assert len(set(decided.values())) <= k + 1
            assert set(decided.values()) <= set(inputs)


def test_value_common_to_k_plus_one_always_accepted():
    n, k = 7, 2
    final = {}

    def observer(round_no, states):
        final.update(states)

    for seed in range(40):
        final.clear()
        inputs = [0, 0, 0, 1, 1, 2, 2]
        cfg = EngineConfig(n, k, 2, seed=seed)
        res = run_protocol(
            cfg,
            SetAgreementProtocol(n, k, (0, 1, 2)),
            inputs,
            random_forger(mix_seed(seed, "adv"), "mutate"),
            observer,
        )
        # 0 is held by three = k+1 processors and must be universally accepted.
        assert all(0 in state.chosen for state in final.values())
        assert all(state.chosen for state in final.values())
        assert set(_decisions(res).values()) <= set(inputs)
        assert len(set(_decisions(res).values())) <= k + 1


def test_twin_adversary_decisions_stay_bounded():
    n, k = 7, 2
    protocol = SetAgreementProtocol(n, k, (0, 1, 2))
    adversary = sybil_twin_adversary(
        [TwinSpec(ProcessorId(1), 2), TwinSpec(ProcessorId(2), 0)], protocol
    )
    cfg = EngineConfig(n, k, 2, seed=4)
    inputs = [1, 1, 0, 2, 1, 0, 2]
    res = run_protocol(cfg, protocol, inputs, adversary)
    decided = _decisions(res)
    assert len(set(decided.values())) <= k + 1
    assert set(decided.values()) <= set(inputs)


def test_empty_choice_raises_when_precondition_violated():
    # n = |V|k makes it possible that no value is held k+1 times.
    protocol = SetAgreementProtocol(2, 1, (0, 1))
    cfg = EngineConfig(2, 1, 2, seed=0)
    with pytest.raises(EmptyM):
        run_protocol(cfg, protocol, [0, 1], null_adversary())


def test_boost_participants_thresholds():
    assert boost_participants([5, 5, 5], [], 1) == 5
    # a forged value occurring exactly k times is never adopted
    assert boost_participants([5, 5, 5], [9], 1) == 5
    with pytest.raises(NoQualifyingValue):
        boost_participants([1, 2], [3], 2)
    with pytest.raises(ValueError):
        boost_participants([1, 1, 1], [2, 2], 1)


def test_boost_participants_exhaustive_small():
    # n0=7, k=2: every decision multiset with <= 3 distinct values, every
    # forged pair: the adopted value is always a real decision.
    n0, k = 7, 2
    values = (0, 1, 2)
    for combo in itertools.combinations_with_replacement(values, n0):
        if len(set(combo)) > k + 1:
            continue
        for forged in itertools.product((0, 1, 2, 3), repeat=k):
            got = boost_participants(list(combo), list(forged), k)
            assert got in combo
