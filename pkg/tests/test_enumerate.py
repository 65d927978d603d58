import json
import pathlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcqtk import qmath
from dcqtk.encoding import decode_matrix, encode_matrix, encode_natural
from dcqtk.enumerate import (
    EXHAUSTED,
    UNDEFINED,
    ProgramSet,
    ProgramSetSpec,
    brute_force_members,
    cantor_decode,
    cantor_pair,
    enum_program_set,
    enum_sigma,
    eta,
    first_index,
    nearest_directly_computable,
    nearest_directly_computable_naive,
    pi1,
    programs_up_to,
)
from dcqtk.errors import ArgumentError
from dcqtk.machine import parse_program, universal_run

DATA = pathlib.Path(__file__).parent / "data"
ZERO = qmath.basis_density("0")
ONE = qmath.basis_density("1")
PLUS = qmath.plus_density(1)
MIXED = qmath.maximally_mixed(1)


def decode_oracle(s):
    # walk the zig-zag literally: diagonal n holds n + 1 indices
    n = 0
    while s >= (n + 1) * (n + 2) // 2:
        n += 1
    m = s - n if n <= 1 else s % (n * (n + 1) // 2)
    return n - m, m


def test_cantor_examples():
    assert cantor_decode(0) == (0, 0)
    assert cantor_decode(5) == (0, 2)
    assert cantor_decode(7) == (2, 1)


def test_cantor_bijective_below_ten_thousand():
    seen = set()
    for s in range(10_000):
        pair = cantor_decode(s)
        assert pair == decode_oracle(s)
        assert cantor_pair(*pair) == s
        seen.add(pair)
    assert len(seen) == 10_000


@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_cantor_pair_round_trip(i, m):
    assert cantor_decode(cantor_pair(i, m)) == (i, m)


def pi1_oracle(s):
    i, m = cantor_decode(s)
    try:
        prog = parse_program(encode_natural(i))
    except Exception:
        return qmath.empty_state()
    return universal_run(prog, "", None, m, forced=True).quantum_output


def test_pi1_zero_is_empty():
    assert pi1(0).shape == (1, 1)


def test_pi1_goldens():
    rows = json.loads((DATA / "pi1_golden.json").read_text())
    assert len(rows) == 203
    for row in rows:
        s = row["s"]
        assert list(cantor_decode(s)) == row["decode"]
        want = qmath.state_from_json(json.dumps(row["quantum"]))
        got = pi1(s)
        assert np.array_equal(got, want)
        assert pi1(s, "classical", 12).text == row["classical"]


def test_pi1_matches_direct_run():
    for s in list(range(200)) + [392057, 5720656]:
        assert np.allclose(pi1(s), pi1_oracle(s))


def test_pi1_classical_agrees_with_quantum():
    for s in list(range(200)) + [392057, 5720656, 200450256]:
        rep = pi1(s, "classical", 12)
        assert np.max(np.abs(decode_matrix(rep.text, 12) - pi1(s))) <= 1e-6


def test_first_one_qubit_state_is_zero_ket():
    s = first_index(lambda rho: True, 1)
    assert s == 392057
    assert np.allclose(pi1(s), ZERO)


@pytest.mark.parametrize(
    "lo,hi,accept",
    [
        (392_000, 394_000, lambda r: True),
        (392_058, 394_000, lambda r: True),
        (5_719_000, 5_721_000, lambda r: qmath.trace_distance(r, PLUS) < 1e-9),
        (5_719_000, 5_721_000, lambda r: qmath.trace_distance(r, ZERO) > 0.3),
    ],
)
def test_first_index_matches_literal_scan(lo, hi, accept):
    want = None
    for s in range(lo, hi):
        rho = pi1(s)
        if qmath.num_qubits(rho) == 1 and accept(rho):
            want = s
            break
    assert first_index(accept, 1, min_s=lo, max_s=hi - 1) == want


def test_first_index_reports_none_when_exhausted():
    assert first_index(lambda r: True, 1, max_s=1000) is None
    with pytest.raises(ArgumentError):
        first_index(lambda r: True, 0)


def test_nearest_agrees_with_naive_scan_on_a_small_ceiling():
    a = nearest_directly_computable(1, encode_matrix(ZERO, 12), max_s=400_000)
    b = nearest_directly_computable_naive(1, encode_matrix(ZERO, 12), max_s=300)
    assert b.exhausted and a.s == 392057
    assert nearest_directly_computable(1, ZERO, max_s=300).exhausted


@pytest.mark.parametrize(
    "target,k,exact",
    [(ZERO, 1, True), (MIXED, 2, False), (PLUS, 4, True)],
)
def test_nearest_examples(target, k, exact):
    r = nearest_directly_computable(k, encode_matrix(target, 12))
    assert not r.exhausted
    assert qmath.trace_distance(r.state, target) <= 1 / (2 * k) + 1e-9
    assert np.allclose(pi1(r.s), r.state)
    if exact:
        assert r.distance == pytest.approx(0.0, abs=1e-9)


# ---------------------------------------------------------------------------
# program-set families


def bell_emitter():
    return "QR\nQR\nOUT\nQL\nH\nCNOT\nHALT"


def test_eta_examples():
    assert np.allclose(eta("QR\nQR\nOUT\nHALT", 1, 1, 100), ZERO)
    assert np.allclose(eta(bell_emitter(), 1, 1, 100), MIXED)
    assert eta("spin: JMP spin\nHALT", 1, 1, 100) is UNDEFINED
    assert eta("HALT", 1, 1, 100) is UNDEFINED  # outputs no qubits


def toy_rows(len_cap, s, m, step_cap):
    """Independent scan: run every well-formed program on 1..s from scratch."""
    rows = []
    for bits, prog in programs_up_to(len_cap):
        outs = []
        for x in range(1, s + 1):
            res = universal_run(prog, encode_natural(x), None, step_cap, forced=False)
            if not res.halted or res.output_qubits < m:
                outs = None
                break
            outs.append(qmath.partial_trace(res.quantum_output, m))
        if outs is not None:
            rows.append((bits, outs))
    return rows


def close(outs, ref, factor):
    return all(qmath.trace_distance(o, ref) <= factor / (x + 1) for x, o in enumerate(outs))


def enum_all(fn, spec):
    out, i = [], 1
    while True:
        b = fn(spec, i)
        if b is EXHAUSTED:
            return out
        out.append(b)
        i += 1


@pytest.mark.parametrize("s", [1, 3])
def test_p_family_matches_scan(s):
    rows = toy_rows(10, s, 1, 256)
    got = enum_all(enum_program_set, ProgramSetSpec(s, "P", m=1, len_cap=10, step_cap=256))
    assert sorted(got) == sorted(b for b, _ in rows)
    assert set(got) == brute_force_members(ProgramSetSpec(s, "P", m=1, len_cap=10, step_cap=256))


def test_p_eta_inside_two_p_eta_and_self_membership():
    rows = toy_rows(10, 2, 1, 256)
    bits, outs = rows[0]
    ref = outs[-1]
    args = dict(eta=ref, m=1, len_cap=10, step_cap=256)
    p_eta = set(enum_all(enum_program_set, ProgramSetSpec(2, "P_eta", **args)))
    two_p = set(enum_all(enum_program_set, ProgramSetSpec(2, "twoP_eta", **args)))
    assert p_eta <= two_p
    assert p_eta == {b for b, o in rows if close(o, ref, 1.0)}
    assert two_p == {b for b, o in rows if close(o, ref, 2.0)}
    # a program whose output never depends on x lies in its own P_eta
    const = [b for b, o in rows if all(np.allclose(x, o[0]) for x in o)][0]
    const_ref = dict(rows)[const][0]
    mine = set(enum_all(enum_program_set, ProgramSetSpec(2, "P_eta", eta=const_ref, m=1, len_cap=10, step_cap=256)))
    assert const in mine


def test_sigma_large_ell_is_empty():
    spec = ProgramSetSpec(2, "Sigma", m=1, len_cap=10, ell=30, step_cap=256)
    assert enum_sigma(spec, 1) is EXHAUSTED


def test_sigma_order_is_replayable():
    spec = ProgramSetSpec(2, "Sigma", m=1, len_cap=10, ell=0, step_cap=256)
    first = enum_all(enum_sigma, spec)
    again = ProgramSet(10, 2, 1, 256, workers=4).sigma_list(0)
    assert first == [p.bits for p in again]


def test_enumeration_rejects_bad_specs():
    with pytest.raises(ArgumentError):
        ProgramSetSpec(0, "P")
    with pytest.raises(ArgumentError):
        ProgramSetSpec(1, "P_eta")
    with pytest.raises(ArgumentError):
        ProgramSetSpec(1, "Sigma")
    with pytest.raises(ArgumentError):
        enum_program_set(ProgramSetSpec(1, "P"), 0)
