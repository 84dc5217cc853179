import pytest

from qpnr.circuit import QasmError, make_sequence, parse_qasm, to_qasm


def test_empty_input():
    seq = parse_qasm("")
    assert len(seq) == 0
    assert seq.qubits == frozenset()


def test_two_instruction_parse():
    seq = parse_qasm("H Q0\nCX Q0,Q1")
    assert len(seq) == 2
    assert seq.qubits == {"Q0", "Q1"}
    assert seq.instructions[0].gate == "H"
    assert seq.instructions[1].operands == ("Q0", "Q1")
    assert [i.id for i in seq] == [0, 1]


def test_comments_blanks_and_case():
    seq = parse_qasm("# header\n\n  h Q0  # trailing\ncnot Q0, Q1\n")
    assert [i.gate for i in seq] == ["H", "CX"]


def test_duplicate_operand_rejected():
    with pytest.raises(QasmError, match="line 1.*duplicate"):
        parse_qasm("CX Q0,Q0")


def test_unknown_gate_has_line_number():
    with pytest.raises(QasmError, match="line 3"):
        parse_qasm("H Q0\nH Q1\nFOO Q0")


def test_arity_mismatch():
    with pytest.raises(QasmError, match="takes 2"):
        parse_qasm("CX Q0")
    with pytest.raises(QasmError, match="takes 1"):
        parse_qasm("H Q0,Q1")


def test_bad_qubit_name():
    with pytest.raises(QasmError, match="bad qubit name"):
        parse_qasm("H 0q")


def test_roundtrip_identity():
    text = "H Q0\nCX Q0,Q1\nMEASURE Q1\nCZ Q2,Q0\n"
    seq = parse_qasm(text)
    assert parse_qasm(to_qasm(seq)) == seq
    assert to_qasm(seq) == text


def test_make_sequence_validates():
    seq = make_sequence([("h", ("Q0",)), ("CNOT", ("Q0", "Q1"))])
    assert [i.gate for i in seq] == ["H", "CX"]
    with pytest.raises(ValueError):
        make_sequence([("CX", ("Q0", "Q0"))])


def test_qubit_order_is_first_use():
    seq = parse_qasm("H B\nCX B,A\nH C")
    assert seq.qubit_order() == ["B", "A", "C"]
