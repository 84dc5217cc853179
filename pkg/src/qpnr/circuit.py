"""Instruction-level IR: gate table, parser, and pretty-printer.

The input format is one instruction per line, ``GATE q0[,q1]``, with ``#``
comments and blank lines ignored. Gate names are case-insensitive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

ONE_QUBIT_GATES = ("H", "X", "Z", "S", "T", "MEASURE")
TWO_QUBIT_GATES = ("CX", "CZ")
GATE_ARITY = {g: 1 for g in ONE_QUBIT_GATES} | {g: 2 for g in TWO_QUBIT_GATES}

# CNOT is accepted as an alias on input and normalized to CX.
_ALIASES = {"CNOT": "CX"}

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class QasmError(ValueError):
    """Parse failure, carrying the 1-based source line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Instruction:
    """A single gate application in source order."""

    id: int
    gate: str
    operands: tuple[str, ...]
    label: str | None = None

    @property
    def arity(self) -> int:
        return GATE_ARITY[self.gate]

    def text(self) -> str:
        return f"{self.gate} {','.join(self.operands)}"


@dataclass(frozen=True)
class InstructionSequence:
    instructions: tuple[Instruction, ...]
    qubits: frozenset[str] = field(default=frozenset())

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def qubit_order(self) -> list[str]:
        """Qubits in order of first use (stable across runs)."""
        seen: dict[str, None] = {}
        for ins in self.instructions:
            for q in ins.operands:
                seen.setdefault(q)
        return list(seen)


def make_sequence(ops: list[tuple[str, tuple[str, ...]]],
                  labels: list[str] | None = None) -> InstructionSequence:
    """Build a sequence from (gate, operands) pairs, validating arity."""
    instructions = []
    for i, (gate, operands) in enumerate(ops):
        gate = _ALIASES.get(gate.upper(), gate.upper())
        if gate not in GATE_ARITY:
            raise ValueError(f"unknown gate {gate!r}")
        if len(operands) != GATE_ARITY[gate]:
            raise ValueError(f"gate {gate} takes {GATE_ARITY[gate]} operand(s)")
        if len(set(operands)) != len(operands):
            raise ValueError(f"duplicate operand in {gate} {operands}")
        label = labels[i] if labels else None
        instructions.append(Instruction(i, gate, tuple(operands), label))
    qubits = frozenset(q for ins in instructions for q in ins.operands)
    return InstructionSequence(tuple(instructions), qubits)


def parse_qasm(text: str) -> InstructionSequence:
    """Parse instruction text into an InstructionSequence.

    Raises QasmError (with line number) on unknown gates, arity mismatches,
    malformed qubit names, and duplicate operands within one instruction.
    """
    instructions: list[Instruction] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        gate = _ALIASES.get(parts[0].upper(), parts[0].upper())
        if gate not in GATE_ARITY:
            raise QasmError(line_no, f"unknown gate {parts[0]!r}")
        if len(parts) < 2:
            raise QasmError(line_no, f"{gate} missing operands")
        operands = tuple(tok.strip() for tok in parts[1].split(","))
        if any(not tok for tok in operands):
            raise QasmError(line_no, "empty operand")
        for tok in operands:
            if not _IDENT.match(tok):
                raise QasmError(line_no, f"bad qubit name {tok!r}")
        if len(operands) != GATE_ARITY[gate]:
            raise QasmError(
                line_no,
                f"{gate} takes {GATE_ARITY[gate]} operand(s), got {len(operands)}")
        if len(set(operands)) != len(operands):
            raise QasmError(line_no, f"duplicate operand in {line!r}")
        instructions.append(Instruction(len(instructions), gate, operands))
    qubits = frozenset(q for ins in instructions for q in ins.operands)
    return InstructionSequence(tuple(instructions), qubits)


def to_qasm(seq: InstructionSequence) -> str:
    """Render a sequence back to text. parse_qasm(to_qasm(s)) == s."""
    return "".join(ins.text() + "\n" for ins in seq.instructions)


def with_labels(seq: InstructionSequence, labels: list[str]) -> InstructionSequence:
    if len(labels) != len(seq.instructions):
        raise ValueError("label count mismatch")
    relabeled = tuple(
        Instruction(ins.id, ins.gate, ins.operands, lab)
        for ins, lab in zip(seq.instructions, labels))
    return InstructionSequence(relabeled, seq.qubits)
