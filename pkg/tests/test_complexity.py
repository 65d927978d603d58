import itertools
import math

import numpy as np
import pytest

from dcqtk import qmath
from dcqtk.complexity import (
    C_CONV,
    C_COPY,
    C_ECHO,
    C_WRAP,
    ECHO_WITNESS,
    INFINITY,
    CounterexampleSpec,
    SearchBudget,
    asm_witness,
    chain_gap,
    conditional_representation_gap,
    counterexample_family,
    counterexample_sigma,
    information_profile,
    k_bounded,
    k_classical_bounded,
    k_conditional_bounded,
    k_direct_bounded,
    parse_witness,
    prefix,
    representation_bits,
    representation_equivalence,
    routine,
    run_witness,
    suffix,
    witnesses_of_length,
)
from dcqtk.encoding import encode_natural
from dcqtk.errors import ArgumentError, DegeneracyError, ParseError
from dcqtk.machine import assemble, universal_run

ZERO = qmath.basis_density("0")
ONE = qmath.basis_density("1")
PLUS = qmath.plus_density(1)
MIXED = qmath.maximally_mixed(1)
BELL = np.zeros((4, 4), dtype=complex)
BELL[np.ix_([0, 3], [0, 3])] = 0.5


def ket_density(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def fixed_states():
    return {
        "0": ZERO,
        "1": ONE,
        "+": PLUS,
        "-": ket_density([1, -1]),
        "mix": MIXED,
        "+i": ket_density([1, 1j]),
        "00": qmath.basis_density("00"),
        "01": qmath.basis_density("01"),
        "bell": BELL,
        "random": qmath.random_density(1, np.random.default_rng(2024)),
    }


def trace_distance_oracle(a, b):
    return 0.5 * np.linalg.norm(a - b, "nuc")


def counter_loop(d):
    """Prints "01" * 2**d using a d-bit binary counter left of the anchor."""
    init = "CL\nW0\n" * d + "CR\n" * d
    body = """
fwd: CR
 BR 0 fwd
 BR 1 fwd
 W0
 CR
 W1
bk: CL
 BR 0 bk
 BR 1 bk
 CL
inc: BR 0 set
 BR B done
 W0
 CL
 JMP inc
set: W1
back: CR
 BR 0 back
 BR 1 back
 JMP fwd
done: HALT
"""
    return assemble(init + body)


# ---------------------------------------------------------------------------
# witness format


@pytest.mark.parametrize("length", range(0, 15))
def test_witnesses_of_length_match_brute_force_parse(length):
    want = []
    for t in itertools.product("01", repeat=length):
        bits = "".join(t)
        try:
            parse_witness(bits)
        except ParseError:
            continue
        want.append(bits)
    assert [w.bits for w in witnesses_of_length(length)] == want


def test_parse_witness_errors():
    for bad in ["", "1", "10", "111", "1010" + "0", "0" + "0", "2"]:
        with pytest.raises(ParseError):
            parse_witness(bad)
    assert parse_witness(ECHO_WITNESS).kind == "ASM"
    assert parse_witness(routine("ALG2")).kind == "ALG2"
    with pytest.raises(ArgumentError):
        routine("ALG2", ECHO_WITNESS)
    with pytest.raises(ArgumentError):
        routine("IGNORE")
    with pytest.raises(ArgumentError):
        routine("NOPE", ECHO_WITNESS)


def test_budget_validation_and_size():
    assert SearchBudget(max_program_len=3).search_space_size == 15
    with pytest.raises(ArgumentError):
        SearchBudget(max_program_len=-1)
    with pytest.raises(ArgumentError):
        SearchBudget(step_cap=0)
    with pytest.raises(ArgumentError):
        SearchBudget(resolution=0)


# ---------------------------------------------------------------------------
# classical and direct estimates


def test_classical_empty_output():
    cert = k_classical_bounded("", "", SearchBudget(max_program_len=8, step_cap=16))
    assert cert.finite and cert.bound_bits <= len(asm_witness("HALT"))
    assert cert.replay()


def test_classical_empty_search_space():
    cert = k_classical_bounded("1", "", SearchBudget(max_program_len=0))
    assert cert.bound_bits == INFINITY and cert.witness is None and cert.replay()


def test_classical_loop_witness_beats_literal_length():
    x = "01" * 512
    w = asm_witness(counter_loop(9))
    # the witness runs standalone, independent of the certificate machinery
    res = universal_run(counter_loop(9), "", None, 2 * 10**6, forced=False)
    assert res.halted and res.classical_output == x
    budget = SearchBudget(max_program_len=len(w), step_cap=2 * 10**6, scan_len=6)
    cert = k_classical_bounded(x, "", budget, hints=[w])
    assert cert.bound_bits == len(w) < len(x)
    assert cert.replay()


def test_classical_rejects_non_binary():
    with pytest.raises(ArgumentError):
        k_classical_bounded("2", "", SearchBudget())


def test_direct_examples():
    budget = SearchBudget(max_program_len=16, step_cap=64)
    z = k_direct_bounded(ZERO, budget)
    assert z.bound_bits <= len(asm_witness("QR\nOUT\nHALT"))
    p = k_direct_bounded(PLUS, budget)
    assert p.bound_bits <= len(asm_witness("QR\nH\nOUT\nHALT"))
    r = k_direct_bounded(qmath.random_density(1, np.random.default_rng(1)), budget)
    assert r.bound_bits == INFINITY
    for cert, target in ((z, ZERO), (p, PLUS)):
        prog = parse_witness(cert.witness).program
        out = universal_run(prog, "", None, 64, forced=False)
        assert out.halted and np.max(np.abs(out.quantum_output - target)) <= 1e-9


# ---------------------------------------------------------------------------
# approximate estimates


def contract_holds(bits, target, resolution, step_cap):
    """Independent contract check: run each k and measure with the nuclear norm."""
    try:
        w = parse_witness(bits)
    except ParseError:
        return False
    for k in range(1, resolution + 1):
        out = run_witness(w, encode_natural(k), None, step_cap)
        if not out.halted or out.quantum_output.shape != target.shape:
            return False
        if trace_distance_oracle(out.quantum_output, target) > 1 / k + 1e-9:
            return False
    return True


@pytest.mark.parametrize("name", ["0", "+"])
def test_k_bounded_is_minimal(name):
    target = fixed_states()[name]
    budget = SearchBudget(max_program_len=16, step_cap=64, resolution=8)
    cert = k_bounded(target, budget)
    assert cert.finite and cert.verified_resolution == 8
    assert contract_holds(cert.witness, target, 8, 64)
    for length in range(cert.bound_bits):
        for t in itertools.product("01", repeat=length):
            assert not contract_holds("".join(t), target, 8, 64)


def test_asm_witnesses_verify_on_the_bare_machine():
    budget = SearchBudget(max_program_len=16, step_cap=64, resolution=8)
    for name in ("0", "+", "mix", "00"):
        target = fixed_states()[name]
        cert = k_bounded(target, budget)
        assert cert.witness.startswith("0")
        prog = parse_witness(cert.witness).program
        for k in range(1, 9):
            res = universal_run(prog, encode_natural(k), None, 64, forced=False)
            assert res.halted
            assert trace_distance_oracle(res.quantum_output, target) <= 1 / k + 1e-9


def test_budget_monotonicity_grid():
    lens, caps = (8, 12, 16), (2, 4, 64)
    for name, rho in fixed_states().items():
        grid = {}
        for n, s in itertools.product(lens, caps):
            cert = k_bounded(rho, SearchBudget(max_program_len=n, step_cap=s, resolution=8))
            assert cert.replay(), name
            grid[n, s] = cert.bound_bits
        for i, j in itertools.product(range(3), range(3)):
            if i < 2:
                assert grid[lens[i + 1], caps[j]] <= grid[lens[i], caps[j]], name
            if j < 2:
                assert grid[lens[i], caps[j + 1]] <= grid[lens[i], caps[j]], name
    # the grid is not flat: the smallest step cap cannot even allocate a qubit
    assert k_bounded(ZERO, SearchBudget(16, 2, 8)).bound_bits == INFINITY
    assert k_bounded(ZERO, SearchBudget(16, 64, 8)).bound_bits < INFINITY


def test_resolution_one_is_vacuous():
    budget = SearchBudget(max_program_len=16, step_cap=64, resolution=1)
    bounds = {k_bounded(r, budget).bound_bits for r in (ZERO, ONE, qmath.random_density(1, np.random.default_rng(3)))}
    assert len(bounds) == 1
    assert bounds.pop() <= len(asm_witness("QR\nOUT\nHALT"))


def test_threads_do_not_change_certificates():
    budget = SearchBudget(max_program_len=16, step_cap=64, resolution=8)
    a = k_bounded(MIXED, budget)
    b = k_bounded(MIXED, budget, workers=4)
    assert a.to_dict() == b.to_dict()


# ---------------------------------------------------------------------------
# conditional estimates


BUDGET = SearchBudget(max_program_len=16, step_cap=64, resolution=8)


@pytest.mark.parametrize("name", ["0", "+", "mix"])
def test_conditional_constants(name):
    rho = fixed_states()[name]
    echo = k_conditional_bounded(rho, "", rho, BUDGET, [ECHO_WITNESS])
    assert echo.bound_bits <= C_ECHO and echo.replay()
    text = representation_bits(rho)
    alg2 = k_conditional_bounded(rho, text, None, BUDGET, [routine("ALG2")])
    assert alg2.bound_bits <= len(routine("ALG2"))
    pair = qmath.tensor(rho, rho)
    copy = k_conditional_bounded(pair, text, None, BUDGET, [routine("ALG2X2")])
    assert copy.bound_bits <= C_COPY and copy.replay()


def test_conditional_rejects_bad_input():
    with pytest.raises(ArgumentError):
        k_conditional_bounded(ZERO, "x", None, BUDGET)


def test_conditional_representation_gap():
    for rho in (ZERO, PLUS):
        r = conditional_representation_gap(rho, rho, BUDGET)
        assert r["holds"] and r["c_wrap"] == C_WRAP
        assert r["K_given_text"].replay() and r["K_given_copy"].replay()


# ---------------------------------------------------------------------------
# prefixes, profiles, chain gaps


def test_prefix_examples():
    assert np.allclose(prefix(qmath.basis_density("01"), 1), ZERO)
    assert np.allclose(prefix(BELL, 1), MIXED)
    rho = qmath.random_density(2, np.random.default_rng(4))
    assert np.allclose(prefix(rho, 2), rho)
    assert np.allclose(suffix(qmath.basis_density("01"), 1), ONE)
    with pytest.raises(ArgumentError):
        prefix(rho, 0)
    with pytest.raises(ArgumentError):
        suffix(rho, 2)


def test_information_profile_product_state():
    prof = information_profile(qmath.basis_density("00"), 1, BUDGET)
    assert prof.complete
    assert prof.c_corr == prof.i1 - prof.iQ
    assert abs(prof.c_corr) <= C_CONV
    assert prof.i1 >= 0
    assert all(c.replay() for c in prof.certificates.values())


def test_information_profile_incomplete_when_budget_runs_out():
    prof = information_profile(BELL, 1, BUDGET)
    assert not prof.complete and prof.c_corr is None
    with pytest.raises(ArgumentError):
        information_profile(BELL, 2, BUDGET)


def test_chain_gap_all_zero_state():
    zz = qmath.basis_density("00")
    for m in (1, 2):
        g = chain_gap(zz, m, BUDGET)
        assert g.gap is not None and abs(g.gap) <= 2 * C_CONV
        k = g.certificates["K"].bound_bits
        assert g.normalizer == pytest.approx(math.log2(2 * k))


def test_chain_gap_propagates_infinity():
    g = chain_gap(qmath.basis_density("01"), 1, BUDGET)
    assert g.gap is None and g.normalizer is None


def test_representation_equivalence_reference_states():
    budget = SearchBudget(max_program_len=40, step_cap=64, resolution=8, scan_len=16)
    diffs = set()
    for rho in (ZERO, PLUS, MIXED):
        r = representation_equivalence(rho, budget)
        assert r["holds"] and abs(r["difference"]) <= C_CONV
        assert r["K_state"].replay() and r["K_repr"].replay()
        diffs.add(r["difference"])
    assert len(diffs) == 1


# ---------------------------------------------------------------------------
# correlated family


def test_counterexample_mixed_example():
    spec = CounterexampleSpec(MIXED, MIXED, 0, 1, 0, 1, 0.5)
    assert spec.gamma == pytest.approx(0.25)
    sigma = counterexample_sigma(spec)
    assert np.allclose(sorted(np.linalg.eigvalsh(sigma)), [0, 0.25, 0.25, 0.5], atol=1e-12)
    rho = counterexample_family(spec)
    # half of I/4 plus half of sigma
    assert np.allclose(sorted(np.linalg.eigvalsh(rho)), [0.125, 0.25, 0.25, 0.375], atol=1e-12)
    assert np.allclose(prefix(rho, 1), MIXED, atol=1e-9)
    assert np.allclose(suffix(rho, 1), MIXED, atol=1e-9)
    assert not np.allclose(counterexample_sigma(spec), np.kron(MIXED, MIXED))


def test_counterexample_lambda_one_is_product():
    rng = np.random.default_rng(5)
    a, b = qmath.random_density(1, rng), qmath.random_density(1, rng)
    spec = CounterexampleSpec(a, b, 0, 1, 1, 0, 1.0)
    assert np.array_equal(counterexample_family(spec), np.kron(a, b))


def test_counterexample_random_specs():
    rng = np.random.default_rng(6)
    for _ in range(100):
        na, nb = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        a, b = qmath.random_density(na, rng), qmath.random_density(nb, rng)
        r, rp = rng.choice(2**na, 2, replace=False)
        s, sp = rng.choice(2**nb, 2, replace=False)
        spec = CounterexampleSpec(a, b, int(r), int(rp), int(s), int(sp), float(rng.uniform()))
        rho = counterexample_family(spec)
        assert qmath.is_density(rho)
        assert np.max(np.abs(prefix(rho, na) - a)) <= 1e-9
        assert np.max(np.abs(suffix(rho, na) - b)) <= 1e-9


def test_counterexample_preconditions():
    with pytest.raises(ArgumentError):
        CounterexampleSpec(MIXED, MIXED, 0, 0, 0, 1)
    with pytest.raises(DegeneracyError):
        CounterexampleSpec(ZERO, MIXED, 0, 1, 0, 1)
    with pytest.raises(ArgumentError):
        CounterexampleSpec(MIXED, MIXED, 0, 1, 0, 1, 1.5)
