"""ISCAS-89 ``.bench`` netlist ingestion: parse, validate, write, generate.

Grammar accepted (one statement per line, ``#`` starts a comment):

    INPUT(name)
    OUTPUT(name)
    name = KIND(a, b, ...)

KIND is one of AND, NAND, OR, NOR, NOT, BUF, XOR, XNOR. Circuits must be
combinational; DFF and other sequential cells are rejected.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

import numpy as np


class GateKind(enum.Enum):
    INPUT = "INPUT"
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    NOT = "NOT"
    BUF = "BUF"
    XOR = "XOR"
    XNOR = "XNOR"


_UNARY = {GateKind.NOT, GateKind.BUF}
_MULTI = {GateKind.AND, GateKind.NAND, GateKind.OR, GateKind.NOR, GateKind.XOR, GateKind.XNOR}
_SEQUENTIAL_TOKENS = {"DFF", "DFFSR", "LATCH", "FF"}


class BenchError(Exception):
    """Parse or validation failure; carries the 1-based source line."""

    def __init__(self, message: str, line: int | None = None, token: str | None = None):
        self.line = line
        self.token = token
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{message}")


class UnknownGateKind(BenchError):
    pass


class DuplicateLabel(BenchError):
    pass


class UndefinedFanin(BenchError):
    pass


class CycleDetected(BenchError):
    pass


class ArityViolation(BenchError):
    pass


class SequentialNotSupported(BenchError):
    pass


@dataclass(frozen=True)
class Gate:
    id: int
    label: str
    kind: GateKind
    fanin_ids: tuple[int, ...]


@dataclass
class Netlist:
    """A validated combinational gate-level circuit.

    ``gates`` preserves declaration order and includes INPUT pseudo-gates;
    ``primary_inputs``/``primary_outputs`` hold gate ids.
    """

    name: str
    gates: list[Gate]
    primary_inputs: list[int]
    primary_outputs: list[int]
    label_to_id: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.label_to_id:
            self.label_to_id = {g.label: g.id for g in self.gates}

    def gate(self, gid: int) -> Gate:
        return self.gates[gid]

    @property
    def n_gates(self) -> int:
        """Number of logic gates, excluding INPUT pseudo-gates."""
        return sum(1 for g in self.gates if g.kind is not GateKind.INPUT)

    def structurally_equal(self, other: "Netlist") -> bool:
        """Label-based structural equality (ids are file-order artifacts)."""
        def shape(n: Netlist):
            gates = sorted(
                (g.label, g.kind.value, tuple(n.gates[f].label for f in g.fanin_ids))
                for g in n.gates
            )
            pis = [n.gates[i].label for i in n.primary_inputs]
            pos = [n.gates[i].label for i in n.primary_outputs]
            return (gates, pis, pos)

        return shape(self) == shape(other)

    def topological_order(self) -> list[int]:
        """Gate ids ordered so fanins precede every gate; stable by id."""
        order: list[int] = []
        indeg = [len(g.fanin_ids) for g in self.gates]
        fanouts: list[list[int]] = [[] for _ in self.gates]
        for g in self.gates:
            for f in g.fanin_ids:
                fanouts[f].append(g.id)
        import heapq

        ready = [g.id for g in self.gates if indeg[g.id] == 0]
        heapq.heapify(ready)
        while ready:
            gid = heapq.heappop(ready)
            order.append(gid)
            for nxt in fanouts[gid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    heapq.heappush(ready, nxt)
        if len(order) != len(self.gates):
            stuck = min(gid for gid, d in enumerate(indeg) if d > 0)
            raise CycleDetected(
                f"combinational loop through '{self.gates[stuck].label}'",
                token=self.gates[stuck].label,
            )
        return order


_LINE_RE = re.compile(r"^\s*(?:(INPUT|OUTPUT)\s*\(\s*([^\s()]+)\s*\)|([^\s=()]+)\s*=\s*([A-Za-z]+)\s*\(([^()]*)\))\s*$")


def parse_bench(text: str, name: str = "circuit") -> Netlist:
    """Parse ``.bench`` text into a validated :class:`Netlist`.

    Raises a :class:`BenchError` subclass with the offending line number on
    malformed input; never raises anything else on arbitrary text.
    """
    decls: list[tuple[int, str, str, list[str]]] = []  # (line, label, kind, fanin labels)
    output_labels: list[tuple[int, str]] = []
    seen_labels: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_RE.match(line)
        if m is None:
            raise BenchError(f"unrecognized statement: {line!r}", line=lineno)
        if m.group(1) == "INPUT":
            label = m.group(2)
            if label in seen_labels:
                raise DuplicateLabel(f"label '{label}' already declared", line=lineno, token=label)
            seen_labels[label] = lineno
            decls.append((lineno, label, "INPUT", []))
        elif m.group(1) == "OUTPUT":
            output_labels.append((lineno, m.group(2)))
        else:
            label, kind_tok = m.group(3), m.group(4).upper()
            fanins = [t.strip() for t in m.group(5).split(",")] if m.group(5).strip() else []
            if kind_tok in _SEQUENTIAL_TOKENS:
                raise SequentialNotSupported(
                    f"'{kind_tok}' is sequential; only combinational circuits are supported",
                    line=lineno,
                    token=kind_tok,
                )
            try:
                kind = GateKind(kind_tok)
            except ValueError:
                raise UnknownGateKind(f"unknown gate kind '{kind_tok}'", line=lineno, token=kind_tok) from None
            if kind is GateKind.INPUT:
                raise UnknownGateKind("INPUT is not a gate kind", line=lineno, token=kind_tok)
            if label in seen_labels:
                raise DuplicateLabel(f"label '{label}' already declared", line=lineno, token=label)
            seen_labels[label] = lineno
            decls.append((lineno, label, kind.value, fanins))

    label_to_id = {label: gid for gid, (_, label, _, _) in enumerate(decls)}
    gates: list[Gate] = []
    for gid, (lineno, label, kind_tok, fanin_labels) in enumerate(decls):
        kind = GateKind(kind_tok)
        fanin_ids = []
        for fl in fanin_labels:
            if fl not in label_to_id:
                raise UndefinedFanin(f"fanin '{fl}' of '{label}' is not declared", line=lineno, token=fl)
            fanin_ids.append(label_to_id[fl])
        n = len(fanin_ids)
        if kind is GateKind.INPUT and n != 0:
            raise ArityViolation(f"INPUT '{label}' cannot have fanins", line=lineno, token=label)
        if kind in _UNARY and n != 1:
            raise ArityViolation(f"{kind.value} '{label}' needs exactly 1 fanin, got {n}", line=lineno, token=label)
        if kind in _MULTI and n < 2:
            raise ArityViolation(f"{kind.value} '{label}' needs at least 2 fanins, got {n}", line=lineno, token=label)
        gates.append(Gate(gid, label, kind, tuple(fanin_ids)))

    primary_outputs = []
    for lineno, label in output_labels:
        if label not in label_to_id:
            raise UndefinedFanin(f"OUTPUT '{label}' is not declared", line=lineno, token=label)
        gid = label_to_id[label]
        if gid not in primary_outputs:
            primary_outputs.append(gid)

    netlist = Netlist(
        name=name,
        gates=gates,
        primary_inputs=[g.id for g in gates if g.kind is GateKind.INPUT],
        primary_outputs=primary_outputs,
    )
    netlist.topological_order()  # raises CycleDetected on loops
    return netlist


def write_bench(n: Netlist) -> str:
    """Emit canonical ``.bench``: INPUTs, OUTPUTs, then gates in topo order."""
    lines = [f"# {n.name}"]
    for gid in n.primary_inputs:
        lines.append(f"INPUT({n.gates[gid].label})")
    for gid in n.primary_outputs:
        lines.append(f"OUTPUT({n.gates[gid].label})")
    for gid in n.topological_order():
        g = n.gates[gid]
        if g.kind is GateKind.INPUT:
            continue
        args = ", ".join(n.gates[f].label for f in g.fanin_ids)
        lines.append(f"{g.label} = {g.kind.value}({args})")
    return "\n".join(lines) + "\n"


# Gate-kind mix for generated circuits. XOR/XNOR kept rare: they blow up
# 8x under AIG decomposition.
_GEN_KINDS = [GateKind.AND, GateKind.NAND, GateKind.OR, GateKind.NOR,
              GateKind.NOT, GateKind.BUF, GateKind.XOR, GateKind.XNOR]
_GEN_WEIGHTS = np.array([0.24, 0.18, 0.22, 0.16, 0.08, 0.04, 0.05, 0.03])
_GEN_ARITIES = np.array([2, 3, 4, 5])
_GEN_ARITY_WEIGHTS = np.array([0.62, 0.24, 0.10, 0.04])


def random_circuit(seed: int, n_pis: int, n_gates: int, name: str | None = None) -> Netlist:
    """Deterministic random combinational circuit, acyclic by construction.

    Fanins are drawn from strictly earlier nodes (recency-biased, so depth
    grows); any gate left without fanout is promoted to a primary output.
    """
    if n_pis < 1 or n_gates < 1:
        raise ValueError("n_pis and n_gates must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([0x7B31, seed]))
    gates: list[Gate] = [Gate(i, f"pi{i}", GateKind.INPUT, ()) for i in range(n_pis)]
    has_fanout = [False] * (n_pis + n_gates)

    for k in range(n_gates):
        gid = n_pis + k
        kind = _GEN_KINDS[rng.choice(len(_GEN_KINDS), p=_GEN_WEIGHTS)]
        pool_size = gid
        if pool_size < 2 and kind in _MULTI:
            kind = GateKind.NOT
        if kind in _UNARY:
            arity = 1
        else:
            arity = int(_GEN_ARITIES[rng.choice(len(_GEN_ARITIES), p=_GEN_ARITY_WEIGHTS)])
            arity = min(arity, pool_size)
        chosen: list[int] = []
        while len(chosen) < arity:
            if pool_size > 8 and rng.random() < 0.7:
                cand = int(rng.integers(max(0, pool_size - 16), pool_size))
            else:
                cand = int(rng.integers(0, pool_size))
            if cand not in chosen:
                chosen.append(cand)
        for c in chosen:
            has_fanout[c] = True
        gates.append(Gate(gid, f"n{gid}", kind, tuple(chosen)))

    pos = [g.id for g in gates[n_pis:] if not has_fanout[g.id]]
    if not pos:
        pos = [gates[-1].id]
    return Netlist(
        name=name or f"rand_s{seed}_p{n_pis}_g{n_gates}",
        gates=gates,
        primary_inputs=list(range(n_pis)),
        primary_outputs=pos,
    )


_TREE_KINDS = [GateKind.AND, GateKind.NAND, GateKind.OR, GateKind.NOR, GateKind.NOT, GateKind.BUF]
_TREE_WEIGHTS = np.array([0.28, 0.22, 0.22, 0.18, 0.06, 0.04])


def random_fanout_free_circuit(seed: int, n_pis: int) -> Netlist:
    """Random single-output tree: every signal feeds exactly one gate.

    XOR/XNOR are excluded because their AIG decomposition duplicates fanins,
    which would reintroduce fanout. Fanout-free circuits are where COP-style
    testability analysis is exact.
    """
    if n_pis < 2:
        raise ValueError("need at least 2 inputs for a tree")
    rng = np.random.default_rng(np.random.SeedSequence([0x12EE, seed]))
    gates: list[Gate] = [Gate(i, f"pi{i}", GateKind.INPUT, ()) for i in range(n_pis)]
    pool = list(range(n_pis))
    while len(pool) > 1:
        kind = _TREE_KINDS[rng.choice(len(_TREE_KINDS), p=_TREE_WEIGHTS)]
        if len(gates) - n_pis >= 6 * n_pis and kind in _UNARY:
            kind = GateKind.AND  # unary gates do not shrink the pool; cap them
        if kind in _UNARY:
            arity = 1
        else:
            arity = int(rng.integers(2, min(3, len(pool)) + 1))
        picks = sorted(rng.choice(len(pool), size=arity, replace=False).tolist(), reverse=True)
        fanins = tuple(pool.pop(i) for i in picks)
        gid = len(gates)
        gates.append(Gate(gid, f"n{gid}", kind, fanins))
        pool.append(gid)
    return Netlist(
        name=f"tree_s{seed}_p{n_pis}",
        gates=gates,
        primary_inputs=list(range(n_pis)),
        primary_outputs=[pool[0]],
    )


def simulate_netlist_packed(n: Netlist, rows: dict[int, int], mask: int) -> dict[int, int]:
    """Evaluate every gate on packed pattern words (one Python int per gate).

    ``rows`` maps each primary-input gate id to its packed row; ``mask`` is
    the all-ones word for the pattern count in use.
    """
    values: dict[int, int] = {}
    for gid in n.topological_order():
        g = n.gates[gid]
        if g.kind is GateKind.INPUT:
            values[gid] = rows[gid] & mask
            continue
        ins = [values[f] for f in g.fanin_ids]
        if g.kind is GateKind.AND:
            v = _reduce_and(ins)
        elif g.kind is GateKind.NAND:
            v = ~_reduce_and(ins) & mask
        elif g.kind is GateKind.OR:
            v = _reduce_or(ins)
        elif g.kind is GateKind.NOR:
            v = ~_reduce_or(ins) & mask
        elif g.kind is GateKind.NOT:
            v = ~ins[0] & mask
        elif g.kind is GateKind.BUF:
            v = ins[0]
        elif g.kind is GateKind.XOR:
            v = _reduce_xor(ins)
        else:  # XNOR
            v = ~_reduce_xor(ins) & mask
        values[gid] = v
    return values


def _reduce_and(vals: list[int]) -> int:
    acc = vals[0]
    for v in vals[1:]:
        acc &= v
    return acc


def _reduce_or(vals: list[int]) -> int:
    acc = vals[0]
    for v in vals[1:]:
        acc |= v
    return acc


def _reduce_xor(vals: list[int]) -> int:
    acc = vals[0]
    for v in vals[1:]:
        acc ^= v
    return acc
