"""Independent reference implementations used as test oracles.

Everything here is deliberately naive and structured differently from the
production paths: scalar or numpy-vector simulation instead of packed words,
full re-simulation instead of cone re-evaluation. The selfcheck command and
the test suite compare the fast paths against these.
"""

from __future__ import annotations

import numpy as np

from .aig import AND, NOT, PI, AigGraph
from .simulate import Fault, FaultSet, PatternSet


def row_to_bits(row: int, n_patterns: int) -> np.ndarray:
    """Unpack a packed row into a uint8 vector, one entry per pattern."""
    data = row.to_bytes((n_patterns + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")[:n_patterns]


def naive_good_values(g: AigGraph, p: PatternSet) -> np.ndarray:
    """(n_nodes, n_patterns) uint8 matrix via one-pattern-at-a-time evaluation."""
    n_pat = p.n_patterns
    out = np.zeros((g.node_count, n_pat), dtype=np.uint8)
    rows = {v: row_to_bits(p.row(idx), n_pat) for v, idx in g.pi_index.items()}
    order = g.topo_order()
    for j in range(n_pat):
        vals = {}
        for v in order:
            k = g.kinds[v]
            if k == PI:
                vals[v] = int(rows[v][j])
            elif k == AND:
                a, b = g.fanins[v]
                vals[v] = vals[a] & vals[b]
            else:
                vals[v] = 1 - vals[g.fanins[v][0]]
            out[v, j] = vals[v]
    return out


def naive_signal_probability(g: AigGraph, p: PatternSet) -> np.ndarray:
    return naive_good_values(g, p).mean(axis=1)


def _eval_all(g: AigGraph, pi_bits: dict[int, np.ndarray], forced: tuple[int, int] | None) -> dict[int, np.ndarray]:
    vals: dict[int, np.ndarray] = {}
    for v in g.topo_order():
        if forced is not None and v == forced[0]:
            vals[v] = np.full_like(next(iter(pi_bits.values())), forced[1])
            continue
        k = g.kinds[v]
        if k == PI:
            vals[v] = pi_bits[v]
        elif k == AND:
            a, b = g.fanins[v]
            vals[v] = vals[a] & vals[b]
        else:
            vals[v] = 1 - vals[g.fanins[v][0]]
    return vals


def naive_fault_detection(g: AigGraph, f: FaultSet, p: PatternSet) -> list[bool]:
    """Full good + per-fault full faulty re-simulation over every pattern."""
    pi_bits = {v: row_to_bits(p.row(idx), p.n_patterns) for v, idx in g.pi_index.items()}
    good = _eval_all(g, pi_bits, None)
    observed = sorted(g.observed)
    flags = []
    for fault in f.faults:
        faulty = _eval_all(g, pi_bits, (fault.site, fault.polarity))
        seen = False
        for o in observed:
            if np.any(good[o] != faulty[o]):
                seen = True
                break
        flags.append(seen)
    return flags


def exhaustive_signal_probability(g: AigGraph) -> np.ndarray:
    """Exact per-node probability of logic 1 over all PI assignments.

    Uses the packed simulator over the full truth table; exactness comes from
    the cyclic tiling in :func:`tpilab.aig.exhaustive_rows`.
    """
    from .simulate import simulate_good

    n_pis = len(g.pi_index)
    if n_pis > 20:
        raise ValueError("exhaustive probability limited to 20 inputs")
    _, probs = simulate_good(g, PatternSet.exhaustive(n_pis))
    return probs
