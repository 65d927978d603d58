import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from dcqtk import qmath
from dcqtk.errors import ArgumentError, CapacityError, DegeneracyError, ValidationError

SEED = 20240611


def trace_distance_oracle(a, b):
    return 0.5 * np.linalg.norm(a - b, "nuc")


def fidelity_oracle(a, b):
    # eigenvalues of a @ b are those of sqrt(a) b sqrt(a)
    lam = np.linalg.eigvals(a @ b)
    return float(np.sum(np.sqrt(np.abs(lam))) ** 2)


def partial_trace_oracle(rho, m):
    n = int(round(math.log2(rho.shape[0])))
    dk, dr = 2**m, 2 ** (n - m)
    out = np.zeros((dk, dk), dtype=complex)
    for a in range(dk):
        for b in range(dk):
            out[a, b] = sum(rho[a * dr + j, b * dr + j] for j in range(dr))
    return out


def test_basis_and_plus_states():
    assert np.allclose(qmath.basis_density("1"), [[0, 0], [0, 1]])
    assert np.allclose(qmath.plus_density(1), 0.5 * np.ones((2, 2)))
    assert np.allclose(qmath.maximally_mixed(2), np.eye(4) / 4)
    assert qmath.num_qubits(qmath.empty_state()) == 0


def test_trace_distance_reference_values():
    zero, mix = qmath.basis_density("0"), qmath.maximally_mixed(1)
    assert qmath.trace_distance(zero, mix) == pytest.approx(0.5)
    assert qmath.trace_distance(zero, qmath.basis_density("1")) == pytest.approx(1.0)
    assert qmath.trace_distance(zero, qmath.plus_density(1)) == pytest.approx(1 / math.sqrt(2))


def test_fidelity_reference_values():
    zero = qmath.basis_density("0")
    assert qmath.fidelity(zero, qmath.plus_density(1)) == pytest.approx(0.5)
    assert qmath.fidelity(zero, qmath.maximally_mixed(1)) == pytest.approx(0.5)
    assert qmath.bures_angle(zero, qmath.basis_density("1")) == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_metrics_match_oracles(n):
    rng = np.random.default_rng([SEED, n])
    for _ in range(50):
        a = qmath.random_density(n, rng, rank=int(rng.integers(1, 2**n + 1)))
        b = qmath.random_density(n, rng)
        assert qmath.trace_distance(a, b) == pytest.approx(trace_distance_oracle(a, b), abs=1e-9)
        assert qmath.fidelity(a, b) == pytest.approx(fidelity_oracle(a, b), abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3), m=st.integers(0, 3))
def test_partial_trace_matches_loops(seed, n, m):
    m = min(m, n)
    rho = qmath.random_density(n, np.random.default_rng(seed))
    assert np.allclose(qmath.partial_trace(rho, m), partial_trace_oracle(rho, m))


def test_partial_trace_of_product():
    rng = np.random.default_rng(SEED)
    a, b = qmath.random_density(1, rng), qmath.random_density(2, rng)
    assert np.allclose(qmath.partial_trace(qmath.tensor(a, b), 1), a)


def test_partial_trace_rejects_bad_split():
    with pytest.raises(ArgumentError):
        qmath.partial_trace(qmath.maximally_mixed(1), 2)


def test_validate_density_errors():
    with pytest.raises(ValidationError):
        qmath.validate_density(np.array([[1, 1], [0, 0]]))
    with pytest.raises(ValidationError):
        qmath.validate_density(np.eye(2))
    with pytest.raises(ValidationError):
        qmath.validate_density(np.diag([1.5, -0.5]))
    assert qmath.is_density(qmath.maximally_mixed(1))


def test_qubit_cap_is_enforced():
    old = qmath.set_qubit_cap(2)
    try:
        with pytest.raises(CapacityError):
            qmath.maximally_mixed(3)
    finally:
        qmath.set_qubit_cap(old)


def test_cnot_cloner_copies_basis_states():
    t = qmath.cnot_cloner(1)
    for bit in "01":
        rho = qmath.basis_density(bit)
        assert np.allclose(qmath.apply_channel(t, rho), qmath.tensor(rho, rho))
        assert qmath.copying_error(t, rho) == pytest.approx(0.0, abs=1e-7)


def test_cnot_cloner_on_plus_gives_bell_state():
    t = qmath.cnot_cloner(1)
    plus = qmath.plus_density(1)
    bell = np.zeros((4, 4))
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    assert np.allclose(qmath.apply_channel(t, plus), bell)
    # |<Bell|++>|^2 = 1/2
    assert qmath.copying_error(t, plus) == pytest.approx(1 / math.sqrt(2))


def test_basis_duplicator_is_trace_preserving():
    t = qmath.basis_duplicator(2)
    assert t.completeness_error() < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_random_channel_is_cptp(seed):
    t = qmath.random_channel(1, 2, seed, out_qubits=2)
    assert t.completeness_error() < 1e-10
    rho = qmath.random_density(1, np.random.default_rng(seed))
    out = qmath.apply_channel(t, rho)
    assert qmath.is_density(out)
    # explicit Kraus sum
    ref = sum(k @ rho @ k.conj().T for k in t.kraus_ops)
    assert np.allclose(out, ref)


def test_random_channel_rejects_too_small_isometry():
    with pytest.raises(ArgumentError):
        qmath.random_channel(3, 0, 1, out_qubits=1)


def test_gram_schmidt_small_example():
    es, tildes = qmath.gram_schmidt_orthogonalize([np.array([1, 0]), np.array([1, 1]) / math.sqrt(2)])
    assert np.allclose(es[0], [1, 0])
    assert np.allclose(es[1], [0, 1])
    assert np.allclose(tildes[1], [0, 1 / math.sqrt(2)])


def test_gram_schmidt_orthonormal_output():
    rng = np.random.default_rng(SEED)
    vs = [qmath.random_pure(2, rng) for _ in range(4)]
    es, _ = qmath.gram_schmidt_orthogonalize(vs)
    g = np.array([[np.vdot(a, b) for b in es] for a in es])
    assert np.allclose(g, np.eye(4), atol=1e-8)


def test_gram_schmidt_rejects_dependent_vectors():
    with pytest.raises(DegeneracyError):
        qmath.gram_schmidt_orthogonalize([np.array([1, 0]), np.array([2, 0])])


def test_a_sequence():
    assert qmath.a_sequence(4) == [1, 2, 6, 42, 1806]


def test_delta0_rational_cases():
    from fractions import Fraction

    assert qmath.delta0(1, "pure", exact=True) == Fraction(1, 25)
    assert qmath.delta0(1, "mixed", exact=True) == Fraction(1, 625)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_delta0_matches_symbolic_evaluation(n):
    N = sympy.Integer(n)
    pure = ((1 - sympy.sqrt(1 - 1 / N)) / (1 + 2 ** ((3**N + 1) / sympy.Integer(2)))) ** 2
    mixed = pure**2 / N**2
    for variant, expr in (("pure", pure), ("mixed", mixed)):
        want = sympy.Float(sympy.N(expr, 40), 40)
        got = qmath.delta0(n, variant)
        assert abs(float(got / want) - 1) < 1e-13


def test_delta0_cap():
    with pytest.raises(CapacityError):
        qmath.delta0(17)


def test_state_json_round_trip():
    rho = qmath.random_density(2, np.random.default_rng(SEED))
    back = qmath.state_from_json(qmath.state_to_json(rho))
    assert np.array_equal(back, rho)


def test_pure_state_fidelity_is_squared_overlap():
    # rank-deficient inputs: noise in zero eigenvalues must not leak into F
    rng = np.random.default_rng(SEED)
    for n in (1, 2, 3):
        for _ in range(200):
            u, v = qmath.random_pure(n, rng), qmath.random_pure(n, rng)
            a, b = np.outer(u, u.conj()), np.outer(v, v.conj())
            want = abs(np.vdot(u, v)) ** 2
            assert qmath.fidelity(a, b) == pytest.approx(want, abs=1e-12)
            assert qmath.trace_distance(a, b) == pytest.approx(math.sqrt(1 - want), abs=1e-9)
