import numpy as np
import pytest

from tpilab.aig import NOT, TpType, from_netlist, splice_after
from tpilab.bench import parse_bench, random_circuit, random_fanout_free_circuit
from tpilab.cop import cop_analyze, cop_greedy_tpi, simulation_greedy_tpi
from tpilab.env import NoLegalActions, legal_action_pairs, replay, EpisodeConfig
from tpilab.reference import exhaustive_signal_probability
from tpilab.simulate import PatternSet, enumerate_faults, fault_simulate


def build(text):
    n = parse_bench(text)
    return n, from_netlist(n)


def test_and_of_two_pis_closed_form():
    n, g = build("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)")
    prof = cop_analyze(g)
    y = g.candidates()[0]
    assert prof.c1[y] == 0.25
    for v in g.pis():
        assert prof.c1[v] == 0.5
        assert prof.obs[v] == 0.5  # sibling must be 1
    assert prof.obs[y] == 1.0  # observed node


def test_not_complement_invariant():
    g = from_netlist(random_circuit(5, 5, 30))
    prof = cop_analyze(g)
    for v in range(g.node_count):
        if g.kinds[v] == NOT:
            assert prof.c1[v] == 1.0 - prof.c1[g.fanins[v][0]]


def test_c1_exact_on_fanout_free_circuits():
    for seed in range(8):
        n = random_fanout_free_circuit(seed, n_pis=int(6 + seed % 6))
        g = from_netlist(n)
        prof = cop_analyze(g)
        exact = exhaustive_signal_probability(g)
        assert np.max(np.abs(prof.c1 - exact)) <= 1e-12, n.name


def test_reconvergence_deviation_recorded_not_asserted_zero():
    # classic reconvergent pattern: y = AND(a, NOT a) is constant 0 but COP
    # sees 0.25; the deviation is real and expected
    _, g = build("INPUT(a)\nOUTPUT(y)\nna = NOT(a)\ny = AND(a, na)")
    prof = cop_analyze(g)
    exact = exhaustive_signal_probability(g)
    y = g.gate_to_node[2]
    deviation = abs(prof.c1[y] - exact[y])
    assert deviation == 0.25  # documented, nonzero


def test_obs_bounds_and_observed_nodes():
    for seed in range(4):
        g = from_netlist(random_circuit(40 + seed, 6, 40))
        prof = cop_analyze(g)
        assert np.all(prof.obs <= 1.0) and np.all(prof.obs >= 0.0)
        for v in g.observed:
            assert prof.obs[v] == 1.0


def test_detect_prob_formula():
    g = from_netlist(random_circuit(9, 4, 12))
    prof = cop_analyze(g)
    for f, dp in zip(prof.fault_set.faults, prof.detect_prob):
        c, o = prof.c1[f.site], prof.obs[f.site]
        assert dp == (c * o if f.polarity_name == "SA0" else (1 - c) * o)


def _brute_force_best(g, faults):
    """Oracle: score every action on a really-spliced graph with a fresh
    full COP run; returns the max gain."""
    base = cop_analyze(g, faults)
    base_mass = float(np.sum(base.detect_prob))
    gains = {}
    for a in legal_action_pairs(g):
        g2 = splice_after(g, a.node, a.tp)
        prof = cop_analyze(g2, faults)
        gains[a] = float(np.sum(prof.detect_prob)) - base_mass
    return gains


def test_greedy_first_action_is_brute_force_argmax():
    for seed in (0, 3, 7):
        g = from_netlist(random_circuit(300 + seed, 5, 18))
        fs = enumerate_faults(g)
        plan = cop_greedy_tpi(g, budget=1, patterns=PatternSet(seed=0, n_patterns=256))
        gains = _brute_force_best(g, fs)
        best_gain = max(gains.values())
        assert plan.predicted_gain[0] >= best_gain - 1e-9
        assert abs(gains[plan.actions[0]] - plan.predicted_gain[0]) <= 1e-9


def test_greedy_targets_unobservable_cone(corpus):
    n = corpus["dangling_cone"]
    g = from_netlist(n)
    plan = cop_greedy_tpi(g, budget=1, patterns=PatternSet(seed=0, n_patterns=256))
    a = plan.actions[0]
    cone = {g.gate_to_node[n.label_to_id[l]] for l in ("g1", "g3", "g4")}
    assert a.tp is TpType.OP and a.node in cone
    gains = _brute_force_best(g, enumerate_faults(g))
    assert gains[a] >= max(gains.values()) - 1e-9


def test_budget_zero_rejected():
    g = from_netlist(random_circuit(1, 4, 10))
    with pytest.raises(ValueError):
        cop_greedy_tpi(g, budget=0, patterns=PatternSet(seed=0, n_patterns=256))


def test_budget_beyond_supply_raises():
    # one candidate: AND-CP, OR-CP, OP-after-CP, plus OP on the PI = 4 max
    _, g = build("INPUT(a)\nOUTPUT(y)\ny = NOT(a)")
    with pytest.raises(NoLegalActions):
        cop_greedy_tpi(g, budget=10, patterns=PatternSet(seed=0, n_patterns=256))


def test_plan_actions_replay_legally():
    g = from_netlist(random_circuit(77, 5, 25))
    p = PatternSet(seed=4, n_patterns=256)
    plan = cop_greedy_tpi(g, budget=4, patterns=p)
    assert len(plan.actions) == 4
    e = replay(g, plan.actions, EpisodeConfig(pattern_seed=4, n_patterns=256))
    assert e.done  # no IllegalAction raised


def test_greedy_deterministic():
    g = from_netlist(random_circuit(13, 5, 22))
    p = PatternSet(seed=1, n_patterns=256)
    p2 = PatternSet(seed=1, n_patterns=256)
    a = cop_greedy_tpi(g, budget=3, patterns=p)
    b = cop_greedy_tpi(g, budget=3, patterns=p2)
    assert a.actions == b.actions and a.predicted_gain == b.predicted_gain


def test_simulation_greedy_matches_exhaustive_scoring():
    # oracle: for every legal action, splice + full fault sim; compare argmax gain
    g = from_netlist(random_circuit(55, 4, 14))
    p = PatternSet(seed=6, n_patterns=256)
    fs = enumerate_faults(g)
    base = fault_simulate(g, fs, p).test_coverage
    best_gain = -1.0
    for a in legal_action_pairs(g):
        g2 = splice_after(g, a.node, a.tp)
        gain = fault_simulate(g2, fs, p).test_coverage - base
        best_gain = max(best_gain, gain)
    plan = simulation_greedy_tpi(g, budget=1, patterns=p)
    assert plan.predicted_gain[0] == pytest.approx(best_gain, abs=1e-12)


def test_simulation_greedy_gain_is_real_tc_delta():
    g = from_netlist(random_circuit(88, 5, 20))
    p = PatternSet(seed=2, n_patterns=256)
    fs = enumerate_faults(g)
    base = fault_simulate(g, fs, p).test_coverage
    plan = simulation_greedy_tpi(g, budget=2, patterns=p)
    cur = g
    tc = base
    for a, gain in zip(plan.actions, plan.predicted_gain):
        cur = splice_after(cur, a.node, a.tp)
        new_tc = fault_simulate(cur, fs, p).test_coverage
        assert gain == pytest.approx(new_tc - tc, abs=1e-12)
        tc = new_tc
