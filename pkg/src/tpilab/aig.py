"""And-inverter graph: conversion from netlists, levelization, TP splicing.

Every original gate decomposes into a fixed local AND/NOT pattern with no
logic optimization; exactly one node per original gate (the one carrying the
gate's output polarity) is a TP candidate. Decomposition-internal nodes are
never candidates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .bench import GateKind, Netlist, simulate_netlist_packed

PI, AND, NOT = 0, 1, 2
KIND_NAMES = ("PI", "AND", "NOT")


class TpType(enum.Enum):
    AND_CP = "AND-CP"
    OR_CP = "OR-CP"
    OP = "OP"

    @property
    def order(self) -> int:
        return _TP_ORDER[self]


_TP_ORDER = {TpType.AND_CP: 0, TpType.OR_CP: 1, TpType.OP: 2}


class AigError(Exception):
    pass


class SequentialNotSupported(AigError):
    pass


class NotACandidate(AigError):
    pass


class DuplicateTp(AigError):
    pass


class TooManyInputs(AigError):
    pass


@dataclass
class AigGraph:
    """DAG over {PI, AND, NOT} nodes with TP-candidate bookkeeping.

    ``fanouts`` is kept as the exact transpose of ``fanins``. ``observed``
    holds POs plus inserted observation points. ``pi_index`` gives each PI
    (original or CP pseudo-input) its pattern-row index.
    """

    name: str
    kinds: list[int]
    fanins: list[tuple[int, ...]]
    fanouts: list[list[int]]
    candidate_mask: list[bool]
    origin: list[int | None]
    observed: set[int]
    level: list[int]
    pi_index: dict[int, int]
    gate_to_node: dict[int, int]
    n_original_pis: int
    placed_tps: set[tuple[int, TpType]] = field(default_factory=set)
    _topo: list[int] | None = field(default=None, repr=False)

    @property
    def node_count(self) -> int:
        return len(self.kinds)

    @property
    def edge_count(self) -> int:
        return sum(len(f) for f in self.fanins)

    def pis(self) -> list[int]:
        return sorted(self.pi_index, key=self.pi_index.get)

    def candidates(self) -> list[int]:
        return [v for v in range(self.node_count) if self.candidate_mask[v]]

    def original_pi_nodes(self) -> list[int]:
        return self.pis()[: self.n_original_pis]

    def topo_order(self) -> list[int]:
        """Stable topological order: ascending (level, id). Cached."""
        if self._topo is None:
            self._topo = sorted(range(self.node_count), key=lambda v: (self.level[v], v))
        return self._topo

    def copy(self) -> "AigGraph":
        return AigGraph(
            name=self.name,
            kinds=list(self.kinds),
            fanins=list(self.fanins),
            fanouts=[list(f) for f in self.fanouts],
            candidate_mask=list(self.candidate_mask),
            origin=list(self.origin),
            observed=set(self.observed),
            level=list(self.level),
            pi_index=dict(self.pi_index),
            gate_to_node=dict(self.gate_to_node),
            n_original_pis=self.n_original_pis,
            placed_tps=set(self.placed_tps),
        )

    def check_consistency(self) -> None:
        """Assert structural invariants; used by tests and selfcheck."""
        n = self.node_count
        transpose: list[list[int]] = [[] for _ in range(n)]
        for v in range(n):
            k = self.kinds[v]
            arity = {PI: 0, AND: 2, NOT: 1}[k]
            assert len(self.fanins[v]) == arity, f"node {v}: bad arity"
            for f in self.fanins[v]:
                transpose[f].append(v)
        for v in range(n):
            assert sorted(transpose[v]) == sorted(self.fanouts[v]), f"node {v}: fanouts not transpose"
            expect = 0 if self.kinds[v] == PI else 1 + max(self.level[f] for f in self.fanins[v])
            assert self.level[v] == expect, f"node {v}: stale level"
            if self.candidate_mask[v]:
                assert self.origin[v] is not None, f"node {v}: candidate without origin"


def _new_node(g: AigGraph, kind: int, fanins: tuple[int, ...], candidate: bool = False,
              origin: int | None = None) -> int:
    v = g.node_count
    g.kinds.append(kind)
    g.fanins.append(fanins)
    g.fanouts.append([])
    g.candidate_mask.append(candidate)
    g.origin.append(origin)
    g.level.append(0 if kind == PI else 1 + max(g.level[f] for f in fanins))
    for f in fanins:
        g.fanouts[f].append(v)
    g._topo = None
    return v


def _and(g, a, b):
    return _new_node(g, AND, (a, b))


def _not(g, a):
    return _new_node(g, NOT, (a,))


def _and_tree(g, ins: list[int]) -> int:
    """Balanced binary AND tree over >= 1 literals."""
    layer = list(ins)
    while len(layer) > 1:
        nxt = []
        for i in range(0, len(layer) - 1, 2):
            nxt.append(_and(g, layer[i], layer[i + 1]))
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def _or_tree(g, ins: list[int]) -> int:
    """OR as NOT(AND(NOT...)) applied over a balanced tree."""
    layer = list(ins)
    while len(layer) > 1:
        nxt = []
        for i in range(0, len(layer) - 1, 2):
            na, nb = _not(g, layer[i]), _not(g, layer[i + 1])
            nxt.append(_not(g, _and(g, na, nb)))
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def _xor2(g, a, b):
    # NOT(AND(NOT(AND(a, NOT b)), NOT(AND(NOT a, b))))
    nb = _not(g, b)
    t1 = _not(g, _and(g, a, nb))
    na = _not(g, a)
    t2 = _not(g, _and(g, na, b))
    return _not(g, _and(g, t1, t2))


def _xor_tree(g, ins: list[int]) -> int:
    layer = list(ins)
    while len(layer) > 1:
        nxt = []
        for i in range(0, len(layer) - 1, 2):
            nxt.append(_xor2(g, layer[i], layer[i + 1]))
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def from_netlist(n: Netlist) -> AigGraph:
    """Convert a netlist to its AIG with candidate masking.

    Fixed decompositions: AND kept; NAND = NOT(AND); OR/NOR via De Morgan;
    XOR/XNOR via the two-AND pattern; BUF = NOT(NOT); wide gates become
    balanced binary trees. One candidate node per original gate.
    """
    g = AigGraph(
        name=n.name, kinds=[], fanins=[], fanouts=[], candidate_mask=[],
        origin=[], observed=set(), level=[], pi_index={}, gate_to_node={},
        n_original_pis=len(n.primary_inputs),
    )
    for gid in n.topological_order():
        gate = n.gates[gid]
        ins = [g.gate_to_node[f] for f in gate.fanin_ids]
        if gate.kind is GateKind.INPUT:
            v = _new_node(g, PI, ())
            g.pi_index[v] = len(g.pi_index)
        elif gate.kind is GateKind.AND:
            v = _and_tree(g, ins)
        elif gate.kind is GateKind.NAND:
            v = _not(g, _and_tree(g, ins))
        elif gate.kind is GateKind.OR:
            v = _or_tree(g, ins)
        elif gate.kind is GateKind.NOR:
            v = _not(g, _or_tree(g, ins))
        elif gate.kind is GateKind.NOT:
            v = _not(g, ins[0])
        elif gate.kind is GateKind.BUF:
            v = _not(g, _not(g, ins[0]))
        elif gate.kind is GateKind.XOR:
            v = _xor_tree(g, ins)
        elif gate.kind is GateKind.XNOR:
            v = _not(g, _xor_tree(g, ins))
        else:
            raise SequentialNotSupported(f"cannot convert {gate.kind}")
        g.gate_to_node[gid] = v
        g.origin[v] = gid
        if gate.kind is not GateKind.INPUT:
            g.candidate_mask[v] = True
    for po in n.primary_outputs:
        g.observed.add(g.gate_to_node[po])
    return g


def levelize(g: AigGraph) -> AigGraph:
    """Recompute all forward levels in place; returns g for chaining."""
    order: list[int] = []
    indeg = [len(f) for f in g.fanins]
    stack = [v for v in range(g.node_count) if indeg[v] == 0]
    while stack:
        v = stack.pop()
        order.append(v)
        g.level[v] = 0 if g.kinds[v] == PI else 1 + max(g.level[f] for f in g.fanins[v])
        for w in g.fanouts[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    if len(order) != g.node_count:
        raise AigError("graph contains a cycle")
    g._topo = None
    return g


def relevel_from(g: AigGraph, seeds: list[int]) -> None:
    """Incrementally refresh levels in the fanout cones of ``seeds``."""
    import heapq

    heap = [(g.level[s], s) for s in seeds]
    heapq.heapify(heap)
    scheduled = set(seeds)
    while heap:
        _, v = heapq.heappop(heap)
        scheduled.discard(v)
        new = 0 if g.kinds[v] == PI else 1 + max(g.level[f] for f in g.fanins[v])
        if new != g.level[v]:
            g.level[v] = new
            for w in g.fanouts[v]:
                if w not in scheduled:
                    scheduled.add(w)
                    heapq.heappush(heap, (g.level[w], w))
    g._topo = None


def is_legal_tp(g: AigGraph, v: int, tp: TpType) -> bool:
    """Structural legality of a TP at v, ignoring episode duplicate rules."""
    if tp is TpType.OP:
        ok_site = g.candidate_mask[v] or (g.kinds[v] == PI and g.origin[v] is not None)
        return ok_site and v not in g.observed
    return g.candidate_mask[v]


def splice_after(g: AigGraph, v: int, tp: TpType) -> AigGraph:
    """Insert a test point after node v; returns a new graph.

    AND-CP adds a pseudo-PI c and an AND(v, c); OR-CP adds c plus the 4-node
    De Morgan OR pattern; both rewire every former reader of v (including
    observation membership) to the new output node. OP adds v to the
    observed set with no structural change.
    """
    if (v, tp) in g.placed_tps:
        raise DuplicateTp(f"{tp.value} already placed at node {v}")
    if tp is TpType.OP:
        if not (g.candidate_mask[v] or (g.kinds[v] == PI and g.origin[v] is not None)):
            raise NotACandidate(f"node {v} is not an OP site")
        if v in g.observed:
            raise DuplicateTp(f"node {v} is already observed")
        out = g.copy()
        out.observed.add(v)
        out.placed_tps.add((v, tp))
        return out

    if not g.candidate_mask[v]:
        raise NotACandidate(f"node {v} is not a CP site")
    out = g.copy()
    old_fanouts = list(out.fanouts[v])
    c = _new_node(out, PI, ())
    out.pi_index[c] = len(out.pi_index)
    if tp is TpType.AND_CP:
        w = _new_node(out, AND, (v, c))
    else:  # OR(v, c) = NOT(AND(NOT v, NOT c))
        nv = _new_node(out, NOT, (v,))
        nc = _new_node(out, NOT, (c,))
        w = _not(out, _and(out, nv, nc))
    # Rewire old readers of v to w; the CP pattern itself keeps reading v.
    for reader in set(old_fanouts):
        out.fanins[reader] = tuple(w if f == v else f for f in out.fanins[reader])
    for reader in old_fanouts:
        out.fanouts[w].append(reader)
    out.fanouts[v] = [u for u in out.fanouts[v] if u not in old_fanouts]
    if v in out.observed:
        out.observed.discard(v)
        out.observed.add(w)
    out.placed_tps.add((v, tp))
    relevel_from(out, old_fanouts)
    return out


@dataclass
class EquivalenceReport:
    equivalent: bool
    counterexample: dict[str, int] | None = None


def exhaustive_rows(n_inputs: int) -> tuple[list[int], int, int]:
    """Packed truth-table rows for each of ``n_inputs`` variables.

    Returns (rows, n_patterns, mask). For fewer than 6 inputs the table is
    repeated cyclically to fill one 64-bit word, which keeps popcount-based
    probabilities exact.
    """
    n_patterns = max(64, 1 << n_inputs)
    mask = (1 << n_patterns) - 1
    rows = []
    for i in range(n_inputs):
        width = 1 << (i + 1)
        row = ((1 << (1 << i)) - 1) << (1 << i)  # one period: half 0s, half 1s
        while width < n_patterns:  # tile by doubling
            row |= row << width
            width <<= 1
        rows.append(row & mask)
    return rows, n_patterns, mask


def simulate_aig_packed(g: AigGraph, rows: dict[int, int], mask: int) -> list[int]:
    """Evaluate all AIG nodes on packed words (independent of simulate.py)."""
    values = [0] * g.node_count
    for v in g.topo_order():
        k = g.kinds[v]
        if k == PI:
            values[v] = rows[v] & mask
        elif k == AND:
            a, b = g.fanins[v]
            values[v] = values[a] & values[b]
        else:
            values[v] = ~values[g.fanins[v][0]] & mask
    return values


def check_equivalence(n: Netlist, g: AigGraph, max_pis: int = 16) -> EquivalenceReport:
    """Exhaustively compare netlist POs against their AIG counterparts.

    Simulates all 2^|PI| assignments through both representations using the
    origin correspondence. CP pseudo-PIs present in g are held at their
    non-controlling value (1 for an AND-CP input, 0 for an OR-CP input), so a
    post-TPI graph is checked in functional mode.
    """
    n_pis = len(n.primary_inputs)
    if n_pis > max_pis:
        raise TooManyInputs(f"{n_pis} PIs exceeds the {max_pis}-input exhaustive limit")
    rows, n_patterns, mask = exhaustive_rows(n_pis)
    net_rows = {gid: rows[i] for i, gid in enumerate(n.primary_inputs)}
    net_vals = simulate_netlist_packed(n, net_rows, mask)

    aig_rows: dict[int, int] = {}
    for i, gid in enumerate(n.primary_inputs):
        aig_rows[g.gate_to_node[gid]] = rows[i]
    for v in g.pis():
        if v not in aig_rows:
            # A CP pseudo-PI feeding an AND directly belongs to an AND-CP
            # (non-controlling 1); one feeding a NOT belongs to an OR-CP.
            reader = g.fanouts[v][0]
            aig_rows[v] = mask if g.kinds[reader] == AND else 0
    aig_vals = simulate_aig_packed(g, aig_rows, mask)

    for po in n.primary_outputs:
        av = aig_vals[g.gate_to_node[po]]
        nv = net_vals[po]
        if av != nv:
            diff = av ^ nv
            bit = (diff & -diff).bit_length() - 1
            assignment = {
                n.gates[gid].label: (rows[i] >> bit) & 1
                for i, gid in enumerate(n.primary_inputs)
            }
            return EquivalenceReport(equivalent=False, counterexample=assignment)
    return EquivalenceReport(equivalent=True)


def dump_aig(g: AigGraph) -> str:
    """Annotated bench-style text dump of the AIG (debug interface)."""
    lines = [f"# aig {g.name}: nodes={g.node_count} edges={g.edge_count}"]
    for v in g.pis():
        tag = " # cp-input" if g.origin[v] is None else ""
        lines.append(f"INPUT(v{v}){tag}")
    for v in sorted(g.observed):
        lines.append(f"OUTPUT(v{v})")
    for v in g.topo_order():
        k = g.kinds[v]
        if k == PI:
            continue
        args = ", ".join(f"v{f}" for f in g.fanins[v])
        note = ""
        if g.candidate_mask[v]:
            note = f" # candidate origin={g.origin[v]} level={g.level[v]}"
        lines.append(f"v{v} = {KIND_NAMES[k]}({args}){note}")
    return "\n".join(lines) + "\n"
