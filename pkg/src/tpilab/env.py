"""The TPI episode: state = circuit graph, action = one test point,
deterministic transitions, terminal-only reward = test-coverage improvement.

The fault universe is frozen at reset over original-circuit sites only, so
pre- and post-TPI coverage are comparable and the terminal reward is the
like-for-like improvement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .aig import PI, AigGraph, TpType, splice_after
from .simulate import CoverageReport, FaultSet, PatternSet, enumerate_faults, fault_simulate


class EnvError(Exception):
    pass


class EpisodeDone(EnvError):
    pass


class IllegalAction(EnvError):
    pass


class NoLegalActions(EnvError):
    pass


@dataclass(frozen=True)
class Action:
    node: int
    tp: TpType

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.node, self.tp.order)

    def to_json_dict(self) -> dict:
        return {"node": self.node, "type": self.tp.value}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Action":
        return cls(node=int(d["node"]), tp=TpType(d["type"]))


def actions_to_json(actions: list[Action]) -> str:
    return json.dumps([a.to_json_dict() for a in actions])


def actions_from_json(text: str) -> list[Action]:
    return [Action.from_json_dict(d) for d in json.loads(text)]


def legal_action_pairs(g: AigGraph) -> list[Action]:
    """All currently-legal (node, type) pairs, sorted by (node id, type order).

    CPs go on candidate nodes only; OPs go on candidates and original PIs not
    yet observed; a (node, type) pair already placed is excluded.
    """
    out: list[Action] = []
    placed = g.placed_tps
    for v in range(g.node_count):
        if g.candidate_mask[v]:
            for tp in (TpType.AND_CP, TpType.OR_CP):
                if (v, tp) not in placed:
                    out.append(Action(v, tp))
            if v not in g.observed and (v, TpType.OP) not in placed:
                out.append(Action(v, TpType.OP))
        elif g.kinds[v] == PI and g.origin[v] is not None:
            if v not in g.observed and (v, TpType.OP) not in placed:
                out.append(Action(v, TpType.OP))
    out.sort(key=lambda a: a.sort_key)
    return out


@dataclass(frozen=True)
class EpisodeConfig:
    pattern_seed: int = 0
    n_patterns: int = 4096
    budget: int | None = None  # None: max(1, ceil(1% of original gates))


@dataclass(frozen=True)
class Episode:
    """Immutable episode state; ``step`` returns a new instance."""

    graphs: tuple[AigGraph, ...]
    fault_set: FaultSet
    patterns: PatternSet
    T: int
    t: int
    initial_tc: float
    initial_report: CoverageReport
    action_log: tuple[Action, ...] = ()
    rewards: tuple[float, ...] = ()
    final_report: CoverageReport | None = None

    @property
    def graph(self) -> AigGraph:
        return self.graphs[-1]

    @property
    def done(self) -> bool:
        return self.t >= self.T


def default_budget(g0: AigGraph) -> int:
    return max(1, math.ceil(0.01 * len(g0.candidates())))


def reset(g0: AigGraph, config: EpisodeConfig) -> Episode:
    """Freeze faults, measure initial coverage, cap T by action supply."""
    patterns = PatternSet(seed=config.pattern_seed, n_patterns=config.n_patterns)
    fs = enumerate_faults(g0)
    report = fault_simulate(g0, fs, patterns)
    T = config.budget if config.budget is not None else default_budget(g0)
    supply = len(legal_action_pairs(g0))
    T = min(T, supply)
    return Episode(
        graphs=(g0,),
        fault_set=fs,
        patterns=patterns,
        T=T,
        t=0,
        initial_tc=report.test_coverage,
        initial_report=report,
    )


def legal_actions(e: Episode) -> list[Action]:
    if e.done:
        raise EpisodeDone("episode has terminated")
    return legal_action_pairs(e.graph)


def step(e: Episode, a: Action) -> tuple[Episode, float, bool]:
    """Apply one TP; reward is 0 except at t = T-1 where it is TC(final)-TC(0)."""
    if e.done:
        raise EpisodeDone("episode has terminated")
    if a not in legal_action_pairs(e.graph):
        raise IllegalAction(f"{a.tp.value} at node {a.node} is not legal here")
    g_next = splice_after(e.graph, a.node, a.tp)
    t_next = e.t + 1
    final_report = e.final_report
    if t_next >= e.T:
        final_report = fault_simulate(g_next, e.fault_set, e.patterns)
        reward = final_report.test_coverage - e.initial_tc
    else:
        reward = 0.0
    e2 = replace(
        e,
        graphs=e.graphs + (g_next,),
        t=t_next,
        action_log=e.action_log + (a,),
        rewards=e.rewards + (reward,),
        final_report=final_report,
    )
    return e2, reward, e2.done


def replay(g0: AigGraph, actions: list[Action], config: EpisodeConfig) -> Episode:
    """Replay a logged action sequence; raises on any illegal action."""
    e = reset(g0, replace(config, budget=len(actions)) if actions else config)
    if not actions:
        return e
    for a in actions:
        e, _, _ = step(e, a)
    return e
