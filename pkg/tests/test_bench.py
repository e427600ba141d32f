import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpilab.bench import (
    ArityViolation,
    BenchError,
    CycleDetected,
    DuplicateLabel,
    GateKind,
    SequentialNotSupported,
    UndefinedFanin,
    UnknownGateKind,
    parse_bench,
    random_circuit,
    write_bench,
)


def test_parse_minimal_and():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)")
    assert len(n.primary_inputs) == 2
    assert n.n_gates == 1
    assert [n.gates[i].label for i in n.primary_outputs] == ["y"]
    assert n.gates[n.label_to_id["y"]].kind is GateKind.AND


def test_undefined_fanin_carries_line():
    with pytest.raises(UndefinedFanin) as exc:
        parse_bench("y = AND(a, b)")
    assert exc.value.line == 1


def test_duplicate_label():
    with pytest.raises(DuplicateLabel) as exc:
        parse_bench("INPUT(a)\nINPUT(a)")
    assert exc.value.line == 2


def test_unknown_gate_kind():
    with pytest.raises(UnknownGateKind) as exc:
        parse_bench("INPUT(a)\ny = FROB(a, a)")
    assert exc.value.token == "FROB"


def test_arity_violations():
    with pytest.raises(ArityViolation):
        parse_bench("INPUT(a)\ny = NOT(a, a)")
    with pytest.raises(ArityViolation):
        parse_bench("INPUT(a)\ny = AND(a)")


def test_cycle_detected():
    with pytest.raises(CycleDetected):
        parse_bench("INPUT(a)\nx = AND(a, y)\ny = AND(a, x)\nOUTPUT(y)")


def test_dff_rejected_as_sequential():
    with pytest.raises(SequentialNotSupported) as exc:
        parse_bench("INPUT(a)\nq = DFF(a)")
    assert "combinational" in str(exc.value)


def test_comments_blanks_and_forward_refs():
    n = parse_bench("# header\n\nOUTPUT(y)\ny = NOT(a)   # uses a before decl\nINPUT(a)\n")
    assert n.n_gates == 1


def test_malformed_statement_is_bench_error_not_crash():
    with pytest.raises(BenchError):
        parse_bench("INPUT a")


def test_write_minimal_and_four_lines_plus_header():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)")
    body = [l for l in write_bench(n).splitlines() if not l.startswith("#")]
    assert body == ["INPUT(a)", "INPUT(b)", "OUTPUT(y)", "y = AND(a, b)"]


def test_write_xor_line():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)")
    assert "y = XOR(a, b)" in write_bench(n)


def test_roundtrip_corpus(corpus):
    for name, n in corpus.items():
        again = parse_bench(write_bench(n), name=name)
        assert n.structurally_equal(again), name


def test_write_idempotent_byte_exact(corpus):
    for name, n in corpus.items():
        once = write_bench(n)
        twice = write_bench(parse_bench(once, name=name))
        assert once == twice, name


@given(seed=st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_random_circuit_roundtrips(seed):
    n = random_circuit(seed, n_pis=4, n_gates=12)
    again = parse_bench(write_bench(n), name=n.name)
    assert n.structurally_equal(again)
    again.topological_order()  # acyclic


def test_random_circuit_deterministic():
    a = random_circuit(1, 4, 10)
    b = random_circuit(1, 4, 10)
    assert write_bench(a) == write_bench(b)
    assert write_bench(a) != write_bench(random_circuit(2, 4, 10))


def test_random_circuit_every_gate_reaches_po():
    n = random_circuit(7, 5, 30)
    reach = set(n.primary_outputs)
    frontier = list(reach)
    while frontier:
        g = n.gates[frontier.pop()]
        for f in g.fanin_ids:
            if f not in reach:
                reach.add(f)
                frontier.append(f)
    gate_ids = {g.id for g in n.gates if g.kind is not GateKind.INPUT}
    assert gate_ids <= reach


def test_random_circuit_rejects_bad_args():
    with pytest.raises(ValueError):
        random_circuit(0, 0, 5)
