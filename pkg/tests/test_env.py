import math

import pytest

from tpilab.aig import TpType, from_netlist
from tpilab.bench import parse_bench, random_circuit
from tpilab.env import (
    Action,
    EpisodeConfig,
    EpisodeDone,
    IllegalAction,
    actions_from_json,
    actions_to_json,
    default_budget,
    legal_actions,
    legal_action_pairs,
    replay,
    reset,
    step,
)
from tpilab.simulate import fault_simulate


def build(text):
    n = parse_bench(text)
    return n, from_netlist(n)


CFG = EpisodeConfig(pattern_seed=0, n_patterns=256)


def test_default_budget_one_percent_rounding():
    g100 = from_netlist(random_circuit(0, 8, 100))
    assert default_budget(g100) == 1  # ceil(1.00)
    g101 = from_netlist(random_circuit(0, 8, 101))
    assert default_budget(g101) == 2  # ceil(1.01)
    g5 = from_netlist(random_circuit(0, 3, 5))
    assert default_budget(g5) == 1


def test_fresh_one_and_legal_set_exact():
    n, g = build("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)")
    e = reset(g, CFG)
    y = g.gate_to_node[n.label_to_id["y"]]
    a_pi, b_pi = g.original_pi_nodes()
    expect = {
        Action(y, TpType.AND_CP),
        Action(y, TpType.OR_CP),
        Action(a_pi, TpType.OP),
        Action(b_pi, TpType.OP),
    }
    assert set(legal_actions(e)) == expect  # y is a PO: (y, OP) masked


def test_duplicate_op_illegal_after_insertion():
    _, g = build(
        "INPUT(a)\nINPUT(b)\nOUTPUT(g2)\n"
        "g1 = AND(a, b)\ng2 = NOR(a, b)\n"
    )
    g1 = g.gate_to_node[3]
    e = reset(g, EpisodeConfig(pattern_seed=0, n_patterns=256, budget=2))
    a = Action(g1, TpType.OP)
    e, _, _ = step(e, a)
    assert a not in legal_actions(e)
    with pytest.raises(IllegalAction):
        step(e, a)


def test_nonterminal_rewards_exactly_zero_and_telescoping():
    g = from_netlist(random_circuit(10, 6, 40))
    e = reset(g, EpisodeConfig(pattern_seed=1, n_patterns=256, budget=3))
    rewards = []
    while not e.done:
        a = legal_actions(e)[0]
        e, r, done = step(e, a)
        rewards.append(r)
    assert rewards[:-1] == [0.0] * (len(rewards) - 1)
    final_tc = fault_simulate(e.graph, e.fault_set, e.patterns).test_coverage
    assert sum(rewards) == final_tc - e.initial_tc


def test_step_is_pure():
    g = from_netlist(random_circuit(3, 4, 20))
    e = reset(g, EpisodeConfig(pattern_seed=0, n_patterns=256, budget=1))
    a = legal_actions(e)[2]
    e1, r1, d1 = step(e, a)
    e2, r2, d2 = step(e, a)
    assert (r1, d1) == (r2, d2)
    assert e1.action_log == e2.action_log
    assert e.t == 0 and not e.action_log  # original untouched


def test_initial_tc_reproducible_bit_exact():
    g = from_netlist(random_circuit(6, 5, 30))
    e1 = reset(g, CFG)
    e2 = reset(g, CFG)
    assert e1.initial_tc == e2.initial_tc
    assert e1.initial_report.detected == e2.initial_report.detected


def test_replay_reproduces_terminal_reward_bit_exact():
    g = from_netlist(random_circuit(14, 5, 35))
    cfg = EpisodeConfig(pattern_seed=3, n_patterns=256, budget=3)
    e = reset(g, cfg)
    while not e.done:
        e, _, _ = step(e, legal_actions(e)[-1])
    e2 = replay(g, list(e.action_log), EpisodeConfig(pattern_seed=3, n_patterns=256))
    assert e2.rewards == e.rewards
    assert e2.final_report.test_coverage == e.final_report.test_coverage


def test_episode_done_guards():
    g = from_netlist(random_circuit(2, 4, 12))
    e = reset(g, EpisodeConfig(pattern_seed=0, n_patterns=256, budget=1))
    e, _, done = step(e, legal_actions(e)[0])
    assert done
    with pytest.raises(EpisodeDone):
        legal_actions(e)
    with pytest.raises(EpisodeDone):
        step(e, Action(0, TpType.OP))


def test_budget_capped_by_supply():
    _, g = build("INPUT(a)\nOUTPUT(y)\ny = NOT(a)")
    supply = len(legal_action_pairs(g))
    e = reset(g, EpisodeConfig(pattern_seed=0, n_patterns=256, budget=99))
    assert e.T == supply
    while not e.done:
        acts = legal_actions(e)
        assert acts  # never empty while t < T
        e, _, _ = step(e, acts[0])


def test_fully_covered_circuit_is_legal_start():
    _, g = build("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)")
    e = reset(g, EpisodeConfig(pattern_seed=0, n_patterns=256))
    assert e.initial_tc == 1.0
    e, r, done = step(e, legal_actions(e)[0])
    assert done and r <= 0.0


def test_op_only_episodes_nonnegative_reward():
    for seed in range(20):
        g = from_netlist(random_circuit(400 + seed, 5, 25))
        e = reset(g, EpisodeConfig(pattern_seed=seed, n_patterns=256, budget=2))
        while not e.done:
            ops = [a for a in legal_actions(e) if a.tp is TpType.OP]
            if not ops:
                break
            e, r, _ = step(e, ops[0])
        if e.done:
            assert e.rewards[-1] >= 0.0


def test_action_log_json_roundtrip():
    log = [Action(3, TpType.AND_CP), Action(7, TpType.OP)]
    text = actions_to_json(log)
    assert '"AND-CP"' in text
    assert actions_from_json(text) == log


def test_cp_pseudo_pi_rows_extend_pattern_indices():
    g = from_netlist(random_circuit(9, 4, 16))
    cfg = EpisodeConfig(pattern_seed=5, n_patterns=256)
    e = reset(g, EpisodeConfig(pattern_seed=5, n_patterns=256, budget=2))
    cps = [a for a in legal_actions(e) if a.tp is not TpType.OP]
    e, _, _ = step(e, cps[0])
    g2 = e.graph
    new_pi = [p for p in g2.pis() if g2.origin[p] is None][0]
    assert g2.pi_index[new_pi] == len(g.pi_index)
    # same seed produces the same row for that index
    assert e.patterns.row(g2.pi_index[new_pi]) == reset(g, cfg).patterns.row(len(g.pi_index))
