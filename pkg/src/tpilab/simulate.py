"""Bit-parallel random-pattern logic and single-stuck-at fault simulation.

Pattern rows are packed into Python arbitrary-precision ints (bit p of a row
is pattern p's value), so an AND gate over all patterns is one ``&``. Fault
simulation forces a site's row to all-0/all-1 and re-evaluates only its
transitive fanout cone, with early exit once nothing differs.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .aig import AND, NOT, PI, AigGraph

WORD = 64


class SimError(Exception):
    pass


class MissingPatternRow(SimError):
    pass


class UnknownFaultSite(SimError):
    pass


class FaultSetMismatch(SimError):
    pass


def _pack_bits64(words: np.ndarray) -> int:
    return int.from_bytes(words.astype("<u8").tobytes(), "little")


@dataclass
class PatternSet:
    """Deterministic per-PI packed pattern rows.

    Row k (the k-th input, original PIs first, CP pseudo-PIs appended in
    insertion order) depends only on (seed, k), so adding test points never
    perturbs existing rows. ``n_patterns`` must be a multiple of the 64-bit
    word width.
    """

    seed: int
    n_patterns: int = 4096
    exhaustive_inputs: int | None = None
    _rows: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_patterns % WORD != 0:
            raise ValueError(f"n_patterns must be a multiple of {WORD}")

    @classmethod
    def exhaustive(cls, n_inputs: int, seed: int = 0) -> "PatternSet":
        """All 2^n assignments (cyclically tiled up to one word)."""
        from .aig import exhaustive_rows

        rows, n_patterns, _ = exhaustive_rows(n_inputs)
        ps = cls(seed=seed, n_patterns=n_patterns, exhaustive_inputs=n_inputs)
        ps._rows = dict(enumerate(rows))
        return ps

    @property
    def mask(self) -> int:
        return (1 << self.n_patterns) - 1

    def row(self, index: int) -> int:
        """Packed fair-coin row for input ``index`` (memoized)."""
        got = self._rows.get(index)
        if got is None:
            rng = np.random.default_rng(np.random.SeedSequence([0x5EED, self.seed, index]))
            words = rng.integers(0, 1 << 64, size=self.n_patterns // WORD, dtype=np.uint64)
            got = self._rows[index] = _pack_bits64(words)
        return got


def simulate_packed(g: AigGraph, rows: dict[int, int], mask: int) -> list[int]:
    """Good-value rows for every node, topological order, word-parallel."""
    values = [0] * g.node_count
    fanins = g.fanins
    kinds = g.kinds
    for v in g.topo_order():
        k = kinds[v]
        if k == AND:
            a, b = fanins[v]
            values[v] = values[a] & values[b]
        elif k == NOT:
            values[v] = ~values[fanins[v][0]] & mask
        else:
            try:
                values[v] = rows[v] & mask
            except KeyError:
                raise MissingPatternRow(f"no pattern row for PI node {v}") from None
    return values


def pi_rows(g: AigGraph, p: PatternSet) -> dict[int, int]:
    return {v: p.row(idx) for v, idx in g.pi_index.items()}


def simulate_good(g: AigGraph, p: PatternSet) -> tuple[list[int], np.ndarray]:
    """Simulate all patterns; returns (packed value rows, signal probability)."""
    values = simulate_packed(g, pi_rows(g, p), p.mask)
    probs = np.array([v.bit_count() for v in values], dtype=np.float64) / p.n_patterns
    return values, probs


SA0, SA1 = 0, 1
_POLARITY_NAMES = ("SA0", "SA1")


@dataclass(frozen=True)
class Fault:
    site: int
    polarity: int  # SA0 or SA1

    @property
    def polarity_name(self) -> str:
        return _POLARITY_NAMES[self.polarity]


@dataclass
class FaultSet:
    faults: list[Fault]
    frozen: bool = True


def enumerate_faults(g: AigGraph) -> FaultSet:
    """Both stuck-at faults on every candidate output and every original PI.

    Decomposition-internal and TP-added nodes carry no faults, so coverage
    before and after TP insertion is compared over the same universe.
    """
    sites = sorted(set(g.candidates()) | set(g.original_pi_nodes()))
    faults = [Fault(s, pol) for s in sites for pol in (SA0, SA1)]
    return FaultSet(faults=faults, frozen=True)


@dataclass
class CoverageReport:
    detected: list[bool]
    n_total: int
    fault_set: FaultSet

    @property
    def n_detected(self) -> int:
        return sum(self.detected)

    @property
    def test_coverage(self) -> float:
        return self.n_detected / self.n_total if self.n_total else 1.0

    def to_json_dict(self) -> dict:
        return {
            "n_detected": self.n_detected,
            "n_total": self.n_total,
            "test_coverage": self.test_coverage,
            "faults": [
                {"site": f.site, "polarity": f.polarity_name, "detected": d}
                for f, d in zip(self.fault_set.faults, self.detected)
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["site", "polarity", "detected"])
        for f, d in zip(self.fault_set.faults, self.detected):
            w.writerow([f.site, f.polarity_name, int(d)])
        w.writerow(["TC", "", repr(self.test_coverage)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _detect_one(g: AigGraph, values: list[int], topo_pos: list[int], fault: Fault,
                mask: int) -> bool:
    """Cone re-simulation for one fault over all patterns at once."""
    site = fault.site
    forced = mask if fault.polarity == SA1 else 0
    diff0 = values[site] ^ forced
    if diff0 == 0:
        return False  # never activated
    if site in g.observed:
        return True
    faulty = {site: forced}
    heap = [(topo_pos[u], u) for u in set(g.fanouts[site])]
    heapq.heapify(heap)
    queued = {u for _, u in heap}
    fanins = g.fanins
    kinds = g.kinds
    while heap:
        _, v = heapq.heappop(heap)
        queued.discard(v)
        k = kinds[v]
        if k == AND:
            a, b = fanins[v]
            new = faulty.get(a, values[a]) & faulty.get(b, values[b])
        else:  # NOT; PIs have no fanins into the cone
            f0 = fanins[v][0]
            new = ~faulty.get(f0, values[f0]) & mask
        if new == values[v]:
            faulty.pop(v, None)
            continue
        if v in g.observed:
            return True
        faulty[v] = new
        for w in set(g.fanouts[v]):
            if w not in queued:
                queued.add(w)
                heapq.heappush(heap, (topo_pos[w], w))
    return False


def fault_simulate(g: AigGraph, f: FaultSet, p: PatternSet) -> CoverageReport:
    """Detection flags for every fault in ``f`` under pattern set ``p``.

    A fault is detected iff some pattern yields a value difference at any
    observed point (POs plus OPs) between the good circuit and the circuit
    with the site forced to the stuck value.
    """
    n = g.node_count
    for fault in f.faults:
        if fault.site >= n:
            raise UnknownFaultSite(f"fault site {fault.site} not in graph")
    values = simulate_packed(g, pi_rows(g, p), p.mask)
    topo_pos = [0] * n
    for pos, v in enumerate(g.topo_order()):
        topo_pos[v] = pos
    detected = [_detect_one(g, values, topo_pos, fault, p.mask) for fault in f.faults]
    return CoverageReport(detected=detected, n_total=len(f.faults), fault_set=f)


def coverage_improvement(before: CoverageReport, after: CoverageReport) -> float:
    """after.TC - before.TC over the same frozen fault set (may be negative)."""
    if before.fault_set.faults != after.fault_set.faults:
        raise FaultSetMismatch("reports computed over different fault sets")
    return after.test_coverage - before.test_coverage
