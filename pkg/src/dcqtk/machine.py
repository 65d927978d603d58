"""Deterministic-control quantum Turing machines and the reference interpreter.

Tapes
-----
Both tapes are indexed by integers with an anchor cell at index 0. The
classical tape holds symbols ``"0"``, ``"1"`` and the blank ``"B"``; it is
stored sparsely. The quantum tape is a *window* of qubits covering cells
``lo..hi`` (always including the anchor); every cell outside the window is
``|0>``. The window grows on demand and never shrinks during a run.

Input and output layout: the classical tape reads ``B x B n B ...`` starting
at the anchor, where ``n = encode_natural(#input qubits)`` and the input state
occupies quantum cells ``1..#qubits``. On output, ``y`` is the text from cell 1
to the first blank, ``m`` is the text between the first and second blank, and
the quantum output is the reduced state of cells ``1..decode_natural(m)``.

A run that is cut off after ``t`` steps (a *forced* run) is read with the same
parse. If ``m`` names more qubits than the qubit cap the quantum output is the
zero-qubit state.

DCQ-ASM
-------
The reference universal machine interprets DCQ-ASM programs. Each executed
instruction is one step. Gates act on the cell under the quantum head, and
two-qubit gates act on ``(head, head + 1)`` with the head as CNOT control.

======== ========= ===================================================
mnemonic code      effect
======== ========= ===================================================
H        00        Hadamard at the quantum head
S        01        phase gate
HALT     100       stop; also terminates the program text
QR       101       quantum head right
OUT      110       declare cells ``1..hi`` as output (writes ``m``)
CNOT     111000    controlled NOT on ``(head, head + 1)``
T        111001    pi/8 gate
CR       111010    classical head right
W0       111011    write ``0``
SWAP     1111000   swap ``(head, head + 1)``
I        1111001   identity gate
QL       1111010   quantum head left
CL       1111011   classical head left
W1       1111100   write ``1``
WB       1111101   write blank
JMP a    1111110   jump to instruction ``a``
BR s a   1111111   jump to ``a`` if the classical head reads ``s``
======== ========= ===================================================

Operands: a symbol is ``0`` -> ``"0"``, ``1`` -> ``"10"``, ``B`` -> ``"11"``;
an address ``a`` is ``1^|c| 0 c`` with ``c = encode_natural(a)``. A program is
a sequence of instructions whose only ``HALT`` is the last one, so the bit
form is self-delimiting. Jumps must land inside the program.

``OUT`` finds the first blank at or after cell 1 and writes
``encode_natural(hi)`` right after it, followed by a blank, where ``hi`` is the
right edge of the quantum window. The head positions are not changed.

Text form: one instruction per line, ``#`` starts a comment, ``name:`` defines
a label, and jump targets may be labels or instruction indices.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import qmath
from .encoding import (
    ClassicalStateRepresentation,
    decode_matrix,
    decode_natural,
    decode_tuple,
    encode_matrix,
    encode_natural,
)
from .errors import ArgumentError, CapacityError, DecodeError, ParseError, ValidationError

__all__ = [
    "BLANK",
    "GATES",
    "Transition",
    "MachineSpec",
    "Configuration",
    "RunResult",
    "Instruction",
    "Program",
    "load_input",
    "read_output",
    "step",
    "run_bounded",
    "parse_program",
    "serialize_program",
    "assemble",
    "disassemble",
    "universal_run",
    "self_interpret",
    "classical_simulate",
    "translate_program",
    "to_dialect",
    "DIALECTS",
    "AsmRun",
]

BLANK = "B"
SYMBOLS = ("0", "1", BLANK)

_SQ2 = 1 / math.sqrt(2)
GATES = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.diag([1, 1j]).astype(complex),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}
TWO_QUBIT = frozenset({"SWAP", "CNOT"})
_MOVES = {"L": -1, "N": 0, "R": 1}


# ---------------------------------------------------------------------------
# quantum window backends


class TensorWindow:
    """Quantum window stored as a state vector (pure) or density matrix.

    Gates are applied by reshaping into one axis per qubit, which keeps the
    cost linear in the window size for single-qubit gates.
    """

    def __init__(self, state: np.ndarray, lo: int = 0):
        self.state = state
        self.lo = lo

    @property
    def is_pure(self) -> bool:
        return self.state.ndim == 1

    @property
    def size(self) -> int:
        return (self.state.shape[0]).bit_length() - 1

    @property
    def hi(self) -> int:
        return self.lo + self.size - 1

    def copy(self) -> "TensorWindow":
        return TensorWindow(self.state.copy(), self.lo)

    def ensure(self, lo: int, hi: int) -> None:
        new_lo, new_hi = min(lo, self.lo), max(hi, self.hi)
        if new_lo == self.lo and new_hi == self.hi:
            return
        n = new_hi - new_lo + 1
        if n > qmath.get_qubit_cap():
            raise CapacityError(f"quantum window of {n} qubits exceeds the qubit cap")
        left = np.zeros(1 << (self.lo - new_lo), dtype=complex)
        left[0] = 1
        right = np.zeros(1 << (new_hi - self.hi), dtype=complex)
        right[0] = 1
        if self.is_pure:
            self.state = np.kron(np.kron(left, self.state), right)
        else:
            self.state = np.kron(np.kron(np.outer(left, left), self.state), np.outer(right, right))
        self.lo = new_lo

    def apply(self, gate: str, cell: int) -> None:
        k = 2 if gate in TWO_QUBIT else 1
        self.ensure(cell, cell + k - 1)
        u = GATES[gate]
        n = self.size
        a = cell - self.lo
        left, mid, right = 1 << a, 1 << k, 1 << (n - a - k)
        if self.is_pure:
            psi = self.state.reshape(left, mid, right)
            self.state = np.einsum("ij,ajb->aib", u, psi).reshape(-1)
        else:
            rho = self.state.reshape(left, mid, right, left, mid, right)
            rho = np.einsum("ij,ajbckd->aibckd", u, rho)
            rho = np.einsum("ajbckd,lk->ajbcld", rho, u.conj())
            d = 1 << n
            self.state = rho.reshape(d, d)

    def reduced(self, first: int, last: int) -> np.ndarray:
        """Density matrix of cells ``first..last`` (cells outside the window are |0>)."""
        if last < first:
            return qmath.empty_state()
        if last - first + 1 > qmath.get_qubit_cap():
            raise CapacityError("reduced state exceeds the qubit cap")
        a, b = max(first, self.lo), min(last, self.hi)
        if a > b:
            return qmath.basis_density("0" * (last - first + 1))
        left, mid, right = 1 << (a - self.lo), 1 << (b - a + 1), 1 << (self.hi - b)
        if self.is_pure:
            psi = self.state.reshape(left, mid, right)
            core = np.einsum("lkr,lmr->km", psi, psi.conj())
        else:
            rho = self.state.reshape(left, mid, right, left, mid, right)
            core = np.einsum("lkrlmr->km", rho)
        if a > first:
            core = np.kron(qmath.basis_density("0" * (a - first)), core)
        if b < last:
            core = np.kron(core, qmath.basis_density("0" * (last - b)))
        return core

    def density(self) -> np.ndarray:
        return np.outer(self.state, self.state.conj()) if self.is_pure else self.state


class MatrixWindow(TensorWindow):
    """Density-matrix window that applies gates as full Kronecker-product unitaries.

    Slower than :class:`TensorWindow`; used as an independent numerical route
    by the classical simulator.
    """

    def __init__(self, state: np.ndarray, lo: int = 0):
        if state.ndim == 1:
            state = np.outer(state, state.conj())
        super().__init__(state, lo)

    def copy(self) -> "MatrixWindow":
        return MatrixWindow(self.state.copy(), self.lo)

    def apply(self, gate: str, cell: int) -> None:
        k = 2 if gate in TWO_QUBIT else 1
        self.ensure(cell, cell + k - 1)
        a = cell - self.lo
        full = np.kron(np.kron(np.eye(1 << a), GATES[gate]), np.eye(1 << (self.size - a - k)))
        self.state = full @ self.state @ full.conj().T

    def reduced(self, first: int, last: int) -> np.ndarray:
        if last < first:
            return qmath.empty_state()
        # pad the window so it covers first..last, then trace out the sides
        w = MatrixWindow(self.state.copy(), self.lo)
        w.ensure(first, last)
        keep = w.state
        lead = first - w.lo
        if lead:
            d = 1 << lead
            rest = keep.shape[0] // d
            keep = np.einsum("ajak->jk", keep.reshape(d, rest, d, rest))
        return qmath.partial_trace(keep, last - first + 1)


# ---------------------------------------------------------------------------
# configurations


@dataclass
class Configuration:
    """Snapshot of a running machine.

    ``control_state`` is a transition-table state for :class:`MachineSpec`
    runs and an instruction index for DCQ-ASM runs.
    """

    control_state: object
    tape: dict
    c_head: int
    q_head: int
    window: TensorWindow
    step_count: int = 0
    halted: bool = False

    def copy(self) -> "Configuration":
        return replace(self, tape=dict(self.tape), window=self.window.copy())

    def read(self) -> str:
        return self.tape.get(self.c_head, BLANK)

    def write(self, sym: str) -> None:
        if sym == BLANK:
            self.tape.pop(self.c_head, None)
        else:
            self.tape[self.c_head] = sym

    def classical_key(self):
        """Hashable summary of everything except the quantum window contents."""
        return (
            self.control_state,
            self.c_head,
            self.q_head,
            self.window.lo,
            self.window.hi,
            tuple(sorted(self.tape.items())),
        )


@dataclass
class RunResult:
    halted: bool
    classical_output: str
    quantum_output: np.ndarray
    steps_used: int
    output_qubits: int = 0

    def same_as(self, other: "RunResult", atol: float = 0.0) -> bool:
        return (
            self.halted == other.halted
            and self.classical_output == other.classical_output
            and self.steps_used == other.steps_used
            and self.quantum_output.shape == other.quantum_output.shape
            and bool(np.allclose(self.quantum_output, other.quantum_output, atol=atol, rtol=0))
        )


def _initial_window(rho_in, window_cls) -> TensorWindow:
    if rho_in is None:
        return window_cls(np.array([1, 0], dtype=complex), 0)
    rho_in = np.asarray(rho_in, dtype=complex)
    anchor = np.array([1, 0], dtype=complex)
    if rho_in.ndim == 1:
        n = qmath.num_qubits(rho_in)
        if n + 1 > qmath.get_qubit_cap():
            raise CapacityError("input state plus anchor exceeds the qubit cap")
        return window_cls(np.kron(anchor, rho_in), 0)
    n = qmath.num_qubits(rho_in)
    if n + 1 > qmath.get_qubit_cap():
        raise CapacityError("input state plus anchor exceeds the qubit cap")
    if n == 0:
        return window_cls(anchor, 0)
    return window_cls(np.kron(np.outer(anchor, anchor), rho_in), 0)


def load_input(x: str, rho_in=None, start_state=0, window_cls=TensorWindow) -> Configuration:
    """Starting configuration for classical input ``x`` and quantum input ``rho_in``.

    ``rho_in`` may be ``None`` (no qubits), a state vector or a density matrix.
    """
    if any(c not in "01" for c in x):
        raise ArgumentError(f"classical input must be binary, got {x!r}")
    n = 0 if rho_in is None else qmath.num_qubits(np.asarray(rho_in))
    tape = {i + 1: c for i, c in enumerate(x)}
    for i, c in enumerate(encode_natural(n)):
        tape[len(x) + 2 + i] = c
    return Configuration(start_state, tape, 0, 0, _initial_window(rho_in, window_cls))


def _output_fields(tape: dict) -> tuple[str, str, int]:
    """Return ``(y, m_text, position of the first blank)``."""
    pos, y = 1, []
    while tape.get(pos, BLANK) != BLANK:
        y.append(tape[pos])
        pos += 1
    first_blank = pos
    pos += 1
    m = []
    while tape.get(pos, BLANK) != BLANK:
        m.append(tape[pos])
        pos += 1
    return "".join(y), "".join(m), first_blank


def output_qubits(c: Configuration) -> int:
    """Number of output qubits named by the tape, or 0 when it exceeds the cap."""
    _, m_text, _ = _output_fields(c.tape)
    m = decode_natural(m_text)
    return m if m <= qmath.get_qubit_cap() else 0


def read_output(c: Configuration) -> tuple[str, np.ndarray]:
    """Parse ``(y, quantum output)`` from a configuration, halted or not."""
    y, m_text, _ = _output_fields(c.tape)
    m = decode_natural(m_text)
    if m > qmath.get_qubit_cap():
        return y, qmath.empty_state()
    return y, c.window.reduced(1, m)


def _result(c: Configuration) -> RunResult:
    y, q = read_output(c)
    return RunResult(c.halted, y, q, c.step_count, qmath.num_qubits(q))


# ---------------------------------------------------------------------------
# transition-table machines


@dataclass(frozen=True)
class Transition:
    gate: str
    q_move: str
    write: str
    c_move: str
    next_state: object


@dataclass
class MachineSpec:
    """A dcq-TM given by its control states and a total transition table.

    ``transition`` maps ``(state, symbol)`` to a :class:`Transition` for every
    non-halting state and every symbol in ``{"0", "1", "B"}``.
    """

    states: frozenset
    start: object
    halt: object
    transition: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = frozenset(self.states)
        if self.start == self.halt:
            raise ValidationError("start and halt states must differ")
        for st in (self.start, self.halt):
            if st not in self.states:
                raise ValidationError(f"state {st!r} not in state set")
        for st in self.states:
            if st == self.halt:
                continue
            for sym in SYMBOLS:
                tr = self.transition.get((st, sym))
                if tr is None:
                    raise ValidationError(f"transition undefined on ({st!r}, {sym!r})")
                if tr.gate not in GATES:
                    raise ValidationError(f"gate {tr.gate!r} not in the gate set")
                if tr.q_move not in _MOVES or tr.c_move not in _MOVES:
                    raise ValidationError("head moves must be L, N or R")
                if tr.write not in SYMBOLS:
                    raise ValidationError(f"cannot write {tr.write!r}")
                if tr.next_state not in self.states:
                    raise ValidationError(f"unknown next state {tr.next_state!r}")


def _step_in_place(spec: MachineSpec, c: Configuration) -> None:
    tr = spec.transition[(c.control_state, c.read())]
    c.window.apply(tr.gate, c.q_head)
    c.write(tr.write)
    c.q_head += _MOVES[tr.q_move]
    c.window.ensure(c.q_head, c.q_head)
    c.c_head += _MOVES[tr.c_move]
    c.control_state = tr.next_state
    c.step_count += 1
    c.halted = tr.next_state == spec.halt


def step(spec: MachineSpec, c: Configuration) -> Configuration:
    """Apply one transition and return the new configuration."""
    if c.control_state == spec.halt:
        raise ArgumentError("configuration is already halted")
    nxt = c.copy()
    _step_in_place(spec, nxt)
    return nxt


def run_bounded(spec: MachineSpec, x: str, rho_in=None, t_max: int = 0, forced: bool = True) -> RunResult:
    """Run for at most ``t_max`` steps.

    A run that has not halted is still parsed for output; ``forced=False``
    only affects how callers should read ``halted`` and is kept for symmetry
    with :func:`universal_run`.
    """
    if t_max < 0:
        raise ArgumentError("t_max must be non-negative")
    c = load_input(x, rho_in, spec.start)
    while not c.halted and c.step_count < t_max:
        _step_in_place(spec, c)
    del forced
    return _result(c)


# ---------------------------------------------------------------------------
# DCQ-ASM


@dataclass(frozen=True)
class Instruction:
    op: str
    sym: str | None = None
    addr: int | None = None

    def __str__(self):
        if self.op == "JMP":
            return f"JMP {self.addr}"
        if self.op == "BR":
            return f"BR {self.sym} {self.addr}"
        return self.op


Program = tuple  # tuple of Instruction

_CODES = {
    "H": "00",
    "S": "01",
    "HALT": "100",
    "QR": "101",
    "OUT": "110",
    "CNOT": "111000",
    "T": "111001",
    "CR": "111010",
    "W0": "111011",
    "SWAP": "1111000",
    "I": "1111001",
    "QL": "1111010",
    "CL": "1111011",
    "W1": "1111100",
    "WB": "1111101",
    "JMP": "1111110",
    "BR": "1111111",
}
_SYM_CODES = {"0": "0", "1": "10", BLANK: "11"}

# alternative code tables; each permutes code words of equal length, so
# translation never changes program length
DIALECTS = {
    "identity": dict(_CODES),
    "permuted": {
        "H": "01",
        "S": "00",
        "HALT": "101",
        "QR": "110",
        "OUT": "100",
        "CNOT": "111011",
        "T": "111010",
        "CR": "111001",
        "W0": "111000",
        "SWAP": "1111111",
        "I": "1111110",
        "QL": "1111101",
        "CL": "1111100",
        "W1": "1111011",
        "WB": "1111010",
        "JMP": "1111001",
        "BR": "1111000",
    },
}
_OPS_WITH_SYM = {"BR"}
_OPS_WITH_ADDR = {"JMP", "BR"}
_ALL_OPS = frozenset(_CODES)


def _encode_addr(a: int) -> str:
    c = encode_natural(a)
    return "1" * len(c) + "0" + c


def serialize_program(program, dialect: str = "identity") -> str:
    """Bit form of an instruction sequence."""
    table = _dialect_table(dialect)
    _check_program(program)
    out = []
    for ins in program:
        out.append(table[ins.op])
        if ins.op in _OPS_WITH_SYM:
            out.append(_SYM_CODES[ins.sym])
        if ins.op in _OPS_WITH_ADDR:
            out.append(_encode_addr(ins.addr))
    return "".join(out)


def _dialect_table(dialect: str) -> dict:
    try:
        return DIALECTS[dialect]
    except KeyError:
        raise ArgumentError(f"unknown dialect {dialect!r}") from None


def _check_program(program) -> None:
    if not program or program[-1].op != "HALT":
        raise ParseError("a program must end with HALT")
    n = len(program)
    for i, ins in enumerate(program):
        if ins.op not in _ALL_OPS:
            raise ParseError(f"unknown opcode {ins.op!r}")
        if ins.op == "HALT" and i != n - 1:
            raise ParseError("HALT may only appear as the last instruction; jump to it instead")
        if ins.op in _OPS_WITH_SYM and ins.sym not in SYMBOLS:
            raise ParseError(f"bad branch symbol {ins.sym!r}")
        if ins.op in _OPS_WITH_ADDR and not (isinstance(ins.addr, int) and 0 <= ins.addr < n):
            raise ParseError(f"jump target {ins.addr!r} outside the program")


def _decoder(table: dict) -> dict:
    return {v: k for k, v in table.items()}


_DECODERS = {name: _decoder(t) for name, t in DIALECTS.items()}


def parse_program(bits: str, dialect: str = "identity") -> Program:
    """Parse the bit form of a program; the whole string must be consumed.

    Raises:
        ParseError: on an incomplete code word, trailing bits after HALT, or a
            jump outside the program.
    """
    if isinstance(bits, tuple):
        _check_program(bits)
        return bits
    _dialect_table(dialect)
    dec = _DECODERS[dialect]
    if any(c not in "01" for c in bits):
        raise ParseError("program bits must be binary")
    prog, pos, n = [], 0, len(bits)

    def take_code(codes):
        nonlocal pos
        for length in range(1, 8):
            w = bits[pos : pos + length]
            if len(w) < length:
                break
            if w in codes:
                pos += length
                return codes[w]
        raise ParseError("incomplete code word")

    sym_dec = {v: k for k, v in _SYM_CODES.items()}
    while True:
        if pos >= n:
            raise ParseError("program ends before HALT")
        op = take_code(dec)
        sym = addr = None
        if op in _OPS_WITH_SYM:
            sym = take_code(sym_dec)
        if op in _OPS_WITH_ADDR:
            run = 0
            while pos < n and bits[pos] == "1":
                run += 1
                pos += 1
            if pos >= n or pos + 1 + run > n:
                raise ParseError("incomplete jump address")
            addr = decode_natural(bits[pos + 1 : pos + 1 + run])
            pos += 1 + run
        prog.append(Instruction(op, sym, addr))
        if op == "HALT":
            break
    if pos != n:
        raise ParseError("trailing bits after HALT")
    prog = tuple(prog)
    _check_program(prog)
    return prog


_LABEL = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*):$")


def assemble(text: str) -> Program:
    """Parse the text form (one instruction per line, ``#`` comments, labels)."""
    lines = []
    labels = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        while True:
            head = line.split(None, 1)
            m = _LABEL.match(head[0]) if head else None
            if not m:
                break
            if m.group(1) in labels:
                raise ParseError(f"duplicate label {m.group(1)!r}")
            labels[m.group(1)] = len(lines)
            line = head[1].strip() if len(head) > 1 else ""
            if not line:
                break
        if line:
            lines.append(line.split())

    def target(tok):
        if tok in labels:
            return labels[tok]
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"unknown label {tok!r}") from None

    prog = []
    for toks in lines:
        op = toks[0].upper()
        if op not in _ALL_OPS:
            raise ParseError(f"unknown mnemonic {toks[0]!r}")
        want = 2 if op == "BR" else 1 if op == "JMP" else 0
        if len(toks) - 1 != want:
            raise ParseError(f"{op} takes {want} operand(s)")
        if op == "JMP":
            prog.append(Instruction(op, None, target(toks[1])))
        elif op == "BR":
            sym = toks[1].upper()
            if sym not in SYMBOLS:
                raise ParseError(f"bad branch symbol {toks[1]!r}")
            prog.append(Instruction(op, sym, target(toks[2])))
        else:
            prog.append(Instruction(op))
    prog = tuple(prog)
    _check_program(prog)
    return prog


def disassemble(program) -> str:
    """Canonical text form: numeric addresses, no labels or comments."""
    return "\n".join(str(ins) for ins in program) + "\n"


def as_program(t) -> Program:
    """Accept a parsed program, its bit form or its text form."""
    if isinstance(t, tuple):
        _check_program(t)
        return t
    if isinstance(t, str) and t and set(t) <= {"0", "1"}:
        return parse_program(t)
    if isinstance(t, str):
        return assemble(t)
    raise ArgumentError(f"cannot interpret {type(t).__name__} as a program")


class AsmRun:
    """Incremental execution of a DCQ-ASM program.

    The run can be advanced one step at a time and its output read at any
    point, which is what dovetailed enumeration needs.
    """

    def __init__(self, program: Program, x: str = "", rho_in=None, window_cls=TensorWindow):
        self.program = program
        self.config = load_input(x, rho_in, 0, window_cls)

    @property
    def halted(self) -> bool:
        return self.config.halted

    @property
    def steps(self) -> int:
        return self.config.step_count

    def advance(self) -> str:
        """Execute one instruction and return its mnemonic."""
        c = self.config
        ins = self.program[c.control_state]
        op = ins.op
        nxt = c.control_state + 1
        if op == "HALT":
            c.halted = True
            nxt = c.control_state
        elif op in GATES:
            c.window.apply(op, c.q_head)
        elif op == "QR":
            c.q_head += 1
            c.window.ensure(c.q_head, c.q_head)
        elif op == "QL":
            c.q_head -= 1
            c.window.ensure(c.q_head, c.q_head)
        elif op == "CR":
            c.c_head += 1
        elif op == "CL":
            c.c_head -= 1
        elif op == "W0":
            c.write("0")
        elif op == "W1":
            c.write("1")
        elif op == "WB":
            c.write(BLANK)
        elif op == "OUT":
            _, old_m, first_blank = _output_fields(c.tape)
            pos = first_blank + 1
            for i in range(len(old_m) + 1):
                c.tape.pop(pos + i, None)
            for i, b in enumerate(encode_natural(c.window.hi)):
                c.tape[pos + i] = b
        elif op == "JMP":
            nxt = ins.addr
        elif op == "BR":
            if c.read() == ins.sym:
                nxt = ins.addr
        c.control_state = nxt
        c.step_count += 1
        return op

    def run(self, t_max: int) -> "AsmRun":
        while not self.config.halted and self.config.step_count < t_max:
            self.advance()
        return self

    def result(self) -> RunResult:
        return _result(self.config)


def universal_run(t, x: str = "", rho_in=None, t_max: int = 10_000, forced: bool = True) -> RunResult:
    """Run program ``t`` on ``(x; rho_in)`` for at most ``t_max`` instructions.

    ``t`` may be a parsed program, its bit form or its text form. The output
    is parsed whether or not the program halted; ``forced`` is recorded for
    the caller's benefit and ``halted`` says which case occurred.
    """
    if t_max < 0:
        raise ArgumentError("t_max must be non-negative")
    del forced
    prog = as_program(t)
    return AsmRun(prog, x, rho_in).run(t_max).result()


def self_interpret(w: str, rho_in=None, t_max: int = 10_000, forced: bool = True) -> RunResult:
    """The reference machine on a tupled input ``w = encode_tuple([t, x])``.

    Decoding and parsing are free; afterwards the run is exactly
    ``universal_run(t, x, rho_in, t_max)``. An input that does not decode to a
    valid program halts at once and outputs its own initial configuration.
    """
    try:
        t, x = decode_tuple(w, 2)
        prog = parse_program(t)
    except (DecodeError, ParseError):
        c = load_input(w, rho_in)
        c.halted = True
        return _result(c)
    return universal_run(prog, x, rho_in, t_max, forced)


def classical_simulate(
    t, x: str, rho_in_text, t_max: int, precision_digits: int = 12
) -> tuple[str, ClassicalStateRepresentation]:
    """Run ``t`` on a decoded input matrix and return the encoded output.

    The quantum window is held as a dense density matrix and every gate is
    applied as an explicit Kronecker-product unitary, independently of the
    tensor route used by :func:`universal_run`.

    Args:
        t: program (parsed, bits or text).
        x: classical input.
        rho_in_text: matrix text or a :class:`ClassicalStateRepresentation`.
        t_max: step bound (the run is read whether or not it halted).
        precision_digits: decimal places of the output text.
    """
    prog = as_program(t)
    if isinstance(rho_in_text, ClassicalStateRepresentation):
        rho = decode_matrix(rho_in_text.text, rho_in_text.precision)
    else:
        rho = decode_matrix(rho_in_text, precision_digits)
    run = AsmRun(prog, x, rho, window_cls=MatrixWindow).run(t_max)
    y, q = read_output(run.config)
    return y, encode_matrix(q, precision_digits)


def to_dialect(program, dialect: str) -> str:
    """Bit form of a reference program in another dialect."""
    return serialize_program(as_program(program), dialect)


def translate_program(p: str, dialect: str) -> tuple[str, int]:
    """Translate a program written in ``dialect`` to the reference dialect.

    Returns ``(reference bits, c)`` where ``c`` is the length overhead bound
    for this dialect pair: ``len(result) <= len(p) + c`` for every program.
    """
    table = _dialect_table(dialect)
    prog = parse_program(p, dialect)
    ref = serialize_program(prog, "identity")
    c = max(0, max(len(_CODES[op]) - len(table[op]) for op in _CODES))
    return ref, c
