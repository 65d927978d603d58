import math

import numpy as np
import pytest

from dcqtk import qmath
from dcqtk.encoding import decode_matrix, encode_matrix, encode_natural, encode_tuple
from dcqtk.errors import ArgumentError, CapacityError, ParseError, ValidationError
from dcqtk.machine import (
    SYMBOLS,
    AsmRun,
    Instruction,
    MachineSpec,
    Transition,
    assemble,
    classical_simulate,
    disassemble,
    load_input,
    parse_program,
    read_output,
    run_bounded,
    self_interpret,
    serialize_program,
    step,
    to_dialect,
    translate_program,
    universal_run,
)


@pytest.fixture(autouse=True)
def small_qubit_cap():
    # random programs may walk the quantum head far; keep windows small
    old = qmath.set_qubit_cap(4)
    yield
    qmath.set_qubit_cap(old)


def attempt(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except CapacityError:
        return None


GATE_OPS = ["I", "H", "S", "T", "SWAP", "CNOT"]
MOVE_OPS = ["QR", "QL", "CR", "CL", "W0", "W1", "WB", "OUT"]


def random_program(rng, length):
    """Random valid instruction list ending in HALT."""
    prog = []
    for i in range(length - 1):
        r = rng.random()
        if r < 0.45:
            prog.append(Instruction(str(rng.choice(GATE_OPS))))
        elif r < 0.85:
            prog.append(Instruction(str(rng.choice(MOVE_OPS))))
        elif r < 0.93:
            prog.append(Instruction("JMP", None, int(rng.integers(0, length))))
        else:
            sym = str(rng.choice(SYMBOLS))
            prog.append(Instruction("BR", sym, int(rng.integers(0, length))))
    prog.append(Instruction("HALT"))
    return tuple(prog)


def table_machine(ops):
    """Transition-table machine running ``ops`` (gate, q_move) in sequence."""
    states = list(range(len(ops) + 1))
    tr = {}
    for i, (gate, q_move) in enumerate(ops):
        for sym in SYMBOLS:
            tr[(i, sym)] = Transition(gate, q_move, sym, "N", i + 1)
    return MachineSpec(frozenset(states), 0, len(ops), tr)


def test_immediate_halt_table_machine():
    spec = table_machine([("I", "N")])
    res = run_bounded(spec, "", None, 5)
    assert res.halted and res.steps_used == 1
    assert res.classical_output == "" and res.quantum_output.shape == (1, 1)


def test_table_machine_hadamard_on_cell_one():
    spec = table_machine([("I", "R"), ("H", "N")])
    res = run_bounded(spec, "", qmath.basis_density("0"), 10)
    assert np.allclose(res.quantum_output, qmath.plus_density(1))


def test_table_machine_cnot_makes_bell_state():
    spec = table_machine([("I", "R"), ("CNOT", "N")])
    res = run_bounded(spec, "", qmath.tensor(qmath.plus_density(1), qmath.basis_density("0")), 10)
    bell = np.zeros((4, 4))
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    assert np.allclose(res.quantum_output, bell)


def test_table_machine_must_be_total():
    with pytest.raises(ValidationError):
        MachineSpec(frozenset({0, 1}), 0, 1, {(0, "0"): Transition("I", "N", "0", "N", 1)})


def test_step_returns_new_configuration():
    spec = table_machine([("H", "N")])
    c0 = load_input("", None)
    c1 = step(spec, c0)
    assert c1.halted and not c0.halted and c0.step_count == 0


def test_load_input_layout():
    c = load_input("1", qmath.basis_density("0"))
    assert c.tape == {1: "1", 3: "0"}  # "1", blank, natural(1) = "0"
    assert c.c_head == 0 and c.q_head == 0
    y, q = read_output(c)
    assert y == "1" and np.allclose(q, qmath.basis_density("0"))


def test_empty_tape_reads_empty_output():
    y, q = read_output(load_input("", None))
    assert y == "" and q.shape == (1, 1)


@pytest.mark.parametrize("x", ["", "0", "1101"])
def test_forced_zero_steps_reads_input(x):
    rho = qmath.random_density(2, np.random.default_rng(3))
    res = universal_run("HALT", x, rho, 0, forced=True)
    assert not res.halted and res.steps_used == 0
    assert res.classical_output == x and np.allclose(res.quantum_output, rho)


def test_halt_program():
    res = universal_run("HALT", "", None, 5)
    assert res.halted and res.steps_used == 1
    assert res.classical_output == "" and res.output_qubits == 0


def test_allocate_one_qubit_program():
    res = universal_run("QR\nOUT\nHALT", "", None, 10)
    assert res.halted and res.steps_used == 3
    assert res.classical_output == ""
    assert np.allclose(res.quantum_output, qmath.basis_density("0"))


def test_hadamard_program():
    res = universal_run("QR\nH\nOUT\nHALT", "", None, 10)
    assert np.allclose(res.quantum_output, qmath.plus_density(1))


def test_non_halting_loop():
    res = universal_run("top: JMP top\nHALT", "", None, 100, forced=False)
    assert not res.halted and res.steps_used == 100


def test_assemble_round_trip_and_parse_errors():
    text = "QR\nH\nloop: CR\nBR 1 loop\nJMP end\nend: OUT\nHALT\n"
    prog = assemble(text)
    assert parse_program(serialize_program(prog)) == prog
    assert assemble(disassemble(prog)) == prog
    with pytest.raises(ParseError):
        assemble("HALT\nH")
    with pytest.raises(ParseError):
        assemble("JMP nowhere\nHALT")
    with pytest.raises(ParseError):
        parse_program("0")  # truncated opcode


def test_opcode_code_is_prefix_free():
    rng = np.random.default_rng(11)
    for _ in range(200):
        prog = random_program(rng, int(rng.integers(1, 12)))
        bits = serialize_program(prog)
        assert parse_program(bits) == prog
        with pytest.raises(ParseError):
            parse_program(bits + "0")


def trace(prog, x, rho, t_max):
    run = AsmRun(prog, x, rho)
    states = []
    while not run.halted and run.steps < t_max:
        states.append(run.config.control_state)
        try:
            run.advance()
        except CapacityError:
            return states, None
    return states, run.result()


def test_quantum_input_never_steers_control():
    rng = np.random.default_rng(5)
    for _ in range(100):
        prog = random_program(rng, int(rng.integers(2, 14)))
        a = qmath.random_density(2, rng)
        b = qmath.random_density(2, rng)
        ta, ra = trace(prog, "01", a, 200)
        tb, rb = trace(prog, "01", b, 200)
        assert ta == tb
        if ra is None:
            assert rb is None
            continue
        assert ra.classical_output == rb.classical_output and ra.steps_used == rb.steps_used


def test_runs_are_deterministic():
    rng = np.random.default_rng(6)
    for _ in range(50):
        prog = random_program(rng, 10)
        rho = qmath.random_density(1, rng)
        first = attempt(universal_run, prog, "1", rho, 300)
        if first is not None:
            assert first.same_as(universal_run(prog, "1", rho, 300))


def test_forced_and_unforced_agree_after_halting():
    rng = np.random.default_rng(7)
    for _ in range(50):
        prog = random_program(rng, 10)
        first = attempt(universal_run, prog, "", None, 500)
        if first is None or not first.halted:
            continue
        for extra in (0, 1, 50):
            later = universal_run(prog, "", None, first.steps_used + extra, forced=True)
            assert later.same_as(first)


def test_window_stays_a_density_matrix():
    rng = np.random.default_rng(8)
    for _ in range(50):
        prog = random_program(rng, 12)
        run = AsmRun(prog, "", qmath.random_density(2, rng))
        while not run.halted and run.steps < 60:
            try:
                run.advance()
            except CapacityError:
                break
            w = run.config.window
            rho = w.state if w.state.ndim == 2 else np.outer(w.state, w.state.conj())
            qmath.validate_density(rho)


def test_self_interpreter_matches_direct_run():
    rng = np.random.default_rng(9)
    for _ in range(50):
        prog = random_program(rng, 10)
        bits = serialize_program(prog)
        rho = qmath.random_density(1, rng)
        direct = attempt(universal_run, prog, "10", rho, 200)
        if direct is None:
            continue
        via = self_interpret(encode_tuple([bits, "10"]), rho, 200)
        assert via.same_as(direct)


def test_classical_simulation_examples():
    zero = encode_matrix(qmath.basis_density("0"), 12)
    y, out = classical_simulate("QR\nH\nQL\nHALT", "", zero, 50)
    assert out.text == "0.5,0 0.5,0\n0.5,0 0.5,0"
    y, out = classical_simulate("HALT", "", zero, 50)
    assert out.text == zero.text


def test_classical_simulation_agrees_with_quantum_route():
    rng = np.random.default_rng(10)
    for _ in range(100):
        prog = random_program(rng, int(rng.integers(2, 10)))
        rho = qmath.random_density(2, rng)
        rep = encode_matrix(rho, 12)
        got = attempt(classical_simulate, prog, "1", rep, 100)
        if got is None:
            continue
        y, out = got
        res = universal_run(prog, "1", decode_matrix(rep.text, 12), 100)
        assert y == res.classical_output
        assert np.max(np.abs(decode_matrix(out.text, 12) - res.quantum_output)) <= 1e-6


def test_identity_dialect_has_no_overhead():
    prog = assemble("QR\nH\nOUT\nHALT")
    bits = serialize_program(prog)
    assert translate_program(bits, "identity") == (bits, 0)


def test_permuted_dialect_same_behaviour_and_length_bound():
    rng = np.random.default_rng(12)
    for i in range(1000):
        prog = random_program(rng, int(rng.integers(1, 15)))
        other = to_dialect(prog, "permuted")
        ref, c = translate_program(other, "permuted")
        assert len(ref) <= len(other) + c
        assert parse_program(ref) == prog
        if i < 50:
            rho = qmath.random_density(1, rng)
            x = encode_natural(int(rng.integers(0, 20)))
            want = attempt(universal_run, prog, x, rho, 200)
            if want is not None:
                assert universal_run(ref, x, rho, 200).same_as(want)


def test_bad_classical_input():
    with pytest.raises(ArgumentError):
        universal_run("HALT", "2", None, 5)
    with pytest.raises(ArgumentError):
        universal_run("HALT", "", None, -1)


def test_tensor_route_matches_dense_route_on_cnot():
    # |+>|0> through CNOT at cell 1
    res = universal_run("QR\nQR\nOUT\nQL\nH\nCNOT\nHALT", "", None, 20)
    assert res.output_qubits == 2
    bell = np.zeros((4, 4))
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    assert np.allclose(res.quantum_output, bell)
    assert math.isclose(np.trace(res.quantum_output).real, 1.0)
