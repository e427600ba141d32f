"""COP controllability/observability estimation and greedy TPI baselines.

``cop_analyze`` does one forward pass for 1-controllability and one reverse
pass for observability (stems take the best branch). The greedy heuristic
scores every legal action by the change in total predicted fault-detection
probability under an incremental COP recompute; a simulation-greedy variant
scores by measured coverage delta instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aig import AND, PI, AigGraph, TpType, splice_after
from .env import Action, NoLegalActions, legal_action_pairs
from .simulate import (
    SA0,
    FaultSet,
    PatternSet,
    _detect_one,
    enumerate_faults,
    fault_simulate,
    pi_rows,
    simulate_packed,
)


@dataclass
class CopProfile:
    c1: np.ndarray
    obs: np.ndarray
    detect_prob: np.ndarray
    fault_set: FaultSet

    def to_csv(self) -> str:
        lines = ["node,c1,obs"]
        for v in range(len(self.c1)):
            lines.append(f"{v},{self.c1[v]!r},{self.obs[v]!r}")
        lines.append("fault_site,polarity,detect_prob")
        for f, dp in zip(self.fault_set.faults, self.detect_prob):
            lines.append(f"{f.site},{f.polarity_name},{dp!r}")
        return "\n".join(lines) + "\n"


def _forward_c1(g: AigGraph) -> list[float]:
    c1 = [0.0] * g.node_count
    for v in g.topo_order():
        k = g.kinds[v]
        if k == PI:
            c1[v] = 0.5
        elif k == AND:
            a, b = g.fanins[v]
            c1[v] = c1[a] * c1[b]
        else:
            c1[v] = 1.0 - c1[g.fanins[v][0]]
    return c1


def _reverse_obs(g: AigGraph, c1: list[float], cp_at: int | None = None,
                 extra_observed: int | None = None) -> list[float]:
    """Observability pass. ``cp_at`` halves that node's outgoing observability
    (a virtual CP whose pseudo-input sensitizes half the patterns);
    ``extra_observed`` adds a virtual OP."""
    obs = [0.0] * g.node_count
    observed = g.observed
    for v in reversed(g.topo_order()):
        best = 0.0
        if v in observed or v == extra_observed:
            best = 1.0
        else:
            for w in g.fanouts[v]:
                if g.kinds[w] == AND:
                    a, b = g.fanins[w]
                    sib = c1[b] if a == v else c1[a]
                    branch = obs[w] * sib
                else:
                    branch = obs[w]
                if branch > best:
                    best = branch
        if v == cp_at:
            # behind a virtual CP everything (incl. moved PO membership)
            # reads the CP output, sensitized half the time
            best *= 0.5
        obs[v] = best
    return obs


def _detect_probs(faults, c1, obs) -> np.ndarray:
    out = np.empty(len(faults))
    for i, f in enumerate(faults):
        c = c1[f.site]
        out[i] = (c if f.polarity == SA0 else 1.0 - c) * obs[f.site]
    return out


def cop_analyze(g: AigGraph, faults: FaultSet | None = None) -> CopProfile:
    """COP testability profile; exact on fanout-free circuits."""
    fs = faults if faults is not None else enumerate_faults(g)
    c1 = _forward_c1(g)
    obs = _reverse_obs(g, c1)
    return CopProfile(
        c1=np.array(c1),
        obs=np.array(obs),
        detect_prob=_detect_probs(fs.faults, c1, obs),
        fault_set=fs,
    )


def _descendant_bits(g: AigGraph) -> list[int]:
    """Self-inclusive downstream reachability as packed bitsets."""
    desc = [0] * g.node_count
    for v in reversed(g.topo_order()):
        d = 1 << v
        for w in g.fanouts[v]:
            d |= desc[w]
        desc[v] = d
    return desc


def _c1_with_cp(g: AigGraph, c1: list[float], v: int, tp: TpType) -> list[float]:
    """Recompute c1 in the fanout cone of v with the CP's effective value."""
    eff = c1[v] * 0.5 if tp is TpType.AND_CP else 0.5 + 0.5 * c1[v]
    out = list(c1)
    get = lambda f: eff if f == v else out[f]
    for u in g.topo_order():
        if u == v or g.kinds[u] == PI:
            continue
        if g.kinds[u] == AND:
            a, b = g.fanins[u]
            if a == v or b == v or out[a] != c1[a] or out[b] != c1[b]:
                out[u] = get(a) * get(b)
        else:
            f0 = g.fanins[u][0]
            if f0 == v or out[f0] != c1[f0]:
                out[u] = 1.0 - get(f0)
    return out


def _cop_action_mass(g: AigGraph, faults, base_c1: list[float], action: Action) -> float:
    """Predicted total detect-probability mass after a virtual action."""
    if action.tp is TpType.OP:
        obs = _reverse_obs(g, base_c1, extra_observed=action.node)
        return float(np.sum(_detect_probs(faults, base_c1, obs)))
    c1 = _c1_with_cp(g, base_c1, action.node, action.tp)
    obs = _reverse_obs(g, c1, cp_at=action.node)
    return float(np.sum(_detect_probs(faults, c1, obs)))


@dataclass
class HeuristicTpPlan:
    actions: list[Action]
    predicted_gain: list[float]


def cop_greedy_tpi(g: AigGraph, budget: int, patterns: PatternSet) -> HeuristicTpPlan:
    """Greedy argmax over predicted detect-probability mass, budget times.

    Ties break to the smallest node id, then AND-CP < OR-CP < OP. The fault
    universe is frozen before the first insertion.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    fs = enumerate_faults(g)
    cur = g
    actions: list[Action] = []
    gains: list[float] = []
    for _ in range(budget):
        legal = legal_action_pairs(cur)
        if not legal:
            raise NoLegalActions("action supply exhausted before budget")
        base_c1 = _forward_c1(cur)
        base_obs = _reverse_obs(cur, base_c1)
        base_mass = float(np.sum(_detect_probs(fs.faults, base_c1, base_obs)))
        best, best_gain = None, -np.inf
        for a in legal:  # already in tie-break order
            gain = _cop_action_mass(cur, fs.faults, base_c1, a) - base_mass
            if gain > best_gain:
                best, best_gain = a, gain
        cur = splice_after(cur, best.node, best.tp)
        actions.append(best)
        gains.append(best_gain)
    return HeuristicTpPlan(actions=actions, predicted_gain=gains)


def simulation_greedy_tpi(g: AigGraph, budget: int, patterns: PatternSet) -> HeuristicTpPlan:
    """Greedy argmax over measured TC delta (the upper-cost baseline).

    Only faults whose fanout cone intersects the modified cone are
    re-simulated; results are exact.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    fs = enumerate_faults(g)
    cur = g
    actions: list[Action] = []
    gains: list[float] = []
    n_faults = len(fs.faults)
    for _ in range(budget):
        legal = legal_action_pairs(cur)
        if not legal:
            raise NoLegalActions("action supply exhausted before budget")
        detected = fault_simulate(cur, fs, patterns).detected
        desc = _descendant_bits(cur)
        values = simulate_packed(cur, pi_rows(cur, patterns), patterns.mask)
        topo_pos = [0] * cur.node_count
        for pos, u in enumerate(cur.topo_order()):
            topo_pos[u] = pos
        probe = cur.copy()
        best, best_gain = None, -np.inf
        for a in legal:
            if a.tp is TpType.OP:
                # monotone: only currently-undetected faults can flip, and only
                # if their effect can reach the new observation site
                hits = 0
                vbit = 1 << a.node
                probe.observed = {a.node}
                for i, f in enumerate(fs.faults):
                    if detected[i] or not (desc[f.site] & vbit):
                        continue
                    if _detect_one(probe, values, topo_pos, f, patterns.mask):
                        hits += 1
                gain = hits / n_faults
            else:
                g_try = splice_after(cur, a.node, a.tp)
                relevant = [i for i, f in enumerate(fs.faults) if desc[f.site] & desc[a.node]]
                sub = FaultSet(faults=[fs.faults[i] for i in relevant])
                sub_rep = fault_simulate(g_try, sub, patterns)
                delta = sum(int(d2) - int(detected[i]) for i, d2 in zip(relevant, sub_rep.detected))
                gain = delta / n_faults
            if gain > best_gain:
                best, best_gain = a, gain
        cur = splice_after(cur, best.node, best.tp)
        actions.append(best)
        gains.append(best_gain)
    return HeuristicTpPlan(actions=actions, predicted_gain=gains)
