"""Linear algebra over qubit registers: states, channels, distances and bounds.

States are plain ``numpy`` complex arrays of shape ``(2**n, 2**n)``. A
zero-qubit state is the ``1x1`` matrix ``[[1]]``. Qubit 1 is the most
significant factor of the Kronecker product, so ``tensor(a, b)`` puts ``a``
on the leading qubits.

Trace distance normalization
----------------------------
:func:`trace_distance` uses the *halved* trace norm,
``D(a, b) = 0.5 * sum(|eig(a - b)|)``, so orthogonal pure states sit at
distance 1. Readers used to the unhalved ``tr|a - b|`` should double every
value reported by this module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .errors import (
    ArgumentError,
    CapacityError,
    DecodeError,
    DegeneracyError,
    ValidationError,
)

__all__ = [
    "ToleranceConfig",
    "KrausChannel",
    "DEFAULT_TOL",
    "get_qubit_cap",
    "set_qubit_cap",
    "num_qubits",
    "empty_state",
    "ket",
    "density",
    "basis_density",
    "plus_density",
    "maximally_mixed",
    "random_pure",
    "random_density",
    "validate_density",
    "is_density",
    "tensor",
    "partial_trace",
    "trace_distance",
    "fidelity",
    "bures_angle",
    "apply_channel",
    "identity_channel",
    "unitary_channel",
    "depolarizing_channel",
    "cnot_cloner",
    "basis_duplicator",
    "copying_error",
    "gram_schmidt_orthogonalize",
    "a_sequence",
    "delta0",
    "random_channel",
    "state_to_json",
    "state_from_json",
]


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical tolerances used by validation and metric checks."""

    hermiticity_tol: float = 1e-9
    psd_tol: float = 1e-9
    trace_tol: float = 1e-9
    metric_tol: float = 1e-7

    def __post_init__(self):
        for name in ("hermiticity_tol", "psd_tol", "trace_tol", "metric_tol"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"{name} must be non-negative")


DEFAULT_TOL = ToleranceConfig()

_QUBIT_CAP = 12


def get_qubit_cap() -> int:
    """Current maximum number of qubits a dense state may carry."""
    return _QUBIT_CAP


def set_qubit_cap(cap: int) -> int:
    """Set the qubit cap and return the previous value."""
    global _QUBIT_CAP
    if cap < 0:
        raise ArgumentError("qubit cap must be non-negative")
    old, _QUBIT_CAP = _QUBIT_CAP, int(cap)
    return old


def _check_cap(n: int) -> None:
    if n > _QUBIT_CAP:
        raise CapacityError(f"{n} qubits exceeds the configured cap of {_QUBIT_CAP}")


def num_qubits(rho: np.ndarray) -> int:
    """Number of qubits of a square ``2**n`` matrix or length-``2**n`` vector."""
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ArgumentError(f"dimension {dim} is not a power of two")
    if rho.ndim == 2 and rho.shape[1] != dim:
        raise ArgumentError("matrix is not square")
    return n


# ---------------------------------------------------------------------------
# constructors


def empty_state() -> np.ndarray:
    """The zero-qubit state."""
    return np.ones((1, 1), dtype=complex)


def ket(bits: str) -> np.ndarray:
    """Computational basis vector for a bit string such as ``"01"``."""
    n = len(bits)
    _check_cap(n)
    v = np.zeros(1 << n, dtype=complex)
    v[int(bits, 2) if bits else 0] = 1.0
    return v


def density(vec) -> np.ndarray:
    """Projector ``|v><v|`` of a (normalized) state vector."""
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def basis_density(bits: str) -> np.ndarray:
    return density(ket(bits))


def plus_density(n: int = 1) -> np.ndarray:
    """``|+>^n`` as a density matrix."""
    _check_cap(n)
    d = 1 << n
    return np.full((d, d), 1.0 / d, dtype=complex)


def maximally_mixed(n: int) -> np.ndarray:
    _check_cap(n)
    d = 1 << n
    return np.eye(d, dtype=complex) / d


def random_pure(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state vector on ``n`` qubits."""
    _check_cap(n)
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from the induced (Ginibre) measure.

    Args:
        n: number of qubits.
        rng: numpy generator.
        rank: rank of the Ginibre factor; full rank when omitted.
    """
    _check_cap(n)
    d = 1 << n
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# validation


def validate_density(rho, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Return ``rho`` as a complex array, raising if it is not a valid state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2:
        raise ValidationError("density matrix must be two-dimensional")
    n = num_qubits(rho)
    _check_cap(n)
    herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if herm > tol.hermiticity_tol:
        raise ValidationError(f"not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1) > tol.trace_tol:
        raise ValidationError(f"trace {tr.real:.12g} differs from 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -tol.psd_tol:
        raise ValidationError(f"not positive semidefinite (eigenvalue {lo:.3g})")
    return rho


def is_density(rho, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    try:
        validate_density(rho, tol)
    except (ValidationError, ArgumentError, CapacityError):
        return False
    return True


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _resolved(w: np.ndarray) -> np.ndarray:
    """Eigenvalues with those below eigh's resolution set to zero.

    Square roots of such values would inject noise of order ``sqrt(eps)``.
    """
    floor = 8 * len(w) * np.finfo(float).eps * max(1.0, float(np.max(np.abs(w))))
    return np.where(w > floor, w, 0.0)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(_hermitize(m))
    w = np.sqrt(_resolved(w))
    return (v * w) @ v.conj().T


# ---------------------------------------------------------------------------
# composition


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two states; ``a`` occupies the leading qubits."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_cap(num_qubits(a) + num_qubits(b))
    return np.kron(a, b)


def partial_trace(rho, keep_first_m: int) -> np.ndarray:
    """Trace out every qubit after the first ``keep_first_m``."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho)
    if not 0 <= keep_first_m <= n:
        raise ArgumentError(f"cannot keep {keep_first_m} of {n} qubits")
    dk = 1 << keep_first_m
    dr = 1 << (n - keep_first_m)
    return np.einsum("ajbj->ab", rho.reshape(dk, dr, dk, dr))


# ---------------------------------------------------------------------------
# distances


def trace_distance(a, b) -> float:
    """Halved trace norm of ``a - b``.

    >>> trace_distance(basis_density("0"), maximally_mixed(1))
    0.5
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _same_shape(a, b)
    w = np.linalg.eigvalsh(_hermitize(a - b))
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def fidelity(a, b) -> float:
    """Squared Uhlmann fidelity ``(tr sqrt(sqrt(a) b sqrt(a)))**2`` in [0, 1]."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _same_shape(a, b)
    sa = _psd_sqrt(a)
    w = np.linalg.eigvalsh(_hermitize(sa @ b @ sa))
    f = float(np.sum(np.sqrt(_resolved(w))) ** 2)
    return min(1.0, max(0.0, f))


def bures_angle(a, b) -> float:
    """Bures angle ``arccos(sqrt(F(a, b)))`` in radians."""
    return float(math.acos(min(1.0, math.sqrt(fidelity(a, b)))))


# ---------------------------------------------------------------------------
# channels


@dataclass
class KrausChannel:
    """Completely positive trace preserving map in Kraus form."""

    input_qubits: int
    output_qubits: int
    kraus_ops: list = field(default_factory=list)

    def __post_init__(self):
        ops = [np.asarray(k, dtype=complex) for k in self.kraus_ops]
        shape = (1 << self.output_qubits, 1 << self.input_qubits)
        for k in ops:
            if k.shape != shape:
                raise ValidationError(f"Kraus operator shape {k.shape}, expected {shape}")
        self.kraus_ops = ops

    def completeness_error(self) -> float:
        d = 1 << self.input_qubits
        s = sum((k.conj().T @ k for k in self.kraus_ops), np.zeros((d, d), dtype=complex))
        return float(np.max(np.abs(s - np.eye(d))))

    def validate(self, tol: float = 1e-9) -> "KrausChannel":
        err = self.completeness_error()
        if err > tol:
            raise ValidationError(f"Kraus operators not complete (deviation {err:.3g})")
        return self

    def __call__(self, rho):
        return apply_channel(self, rho)


def apply_channel(t: KrausChannel, rho) -> np.ndarray:
    """``sum_i K_i rho K_i^dagger``."""
    rho = np.asarray(rho, dtype=complex)
    if num_qubits(rho) != t.input_qubits:
        raise ArgumentError(
            f"channel expects {t.input_qubits} qubits, state has {num_qubits(rho)}"
        )
    t.validate()
    out = sum(k @ rho @ k.conj().T for k in t.kraus_ops)
    return _hermitize(np.asarray(out, dtype=complex))


def identity_channel(n: int) -> KrausChannel:
    return KrausChannel(n, n, [np.eye(1 << n, dtype=complex)])


def unitary_channel(u) -> KrausChannel:
    u = np.asarray(u, dtype=complex)
    n = num_qubits(u)
    return KrausChannel(n, n, [u])


def depolarizing_channel(p: float) -> KrausChannel:
    """Single-qubit depolarizing map; ``p = 3/4`` sends every state to I/2."""
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.diag([1, -1]).astype(complex)
    ops = [math.sqrt(1 - p) * np.eye(2, dtype=complex)]
    ops += [math.sqrt(p / 3) * s for s in (x, y, z)]
    return KrausChannel(1, 1, ops)


def cnot_cloner(n: int = 1) -> KrausChannel:
    """Append ``n`` fresh qubits and CNOT each input qubit onto its copy.

    Basis states are copied exactly; superpositions become entangled.
    """
    d = 1 << n
    # isometry |i> -> |i>|i>
    v = np.zeros((d * d, d), dtype=complex)
    for i in range(d):
        v[i * d + i, i] = 1.0
    return KrausChannel(n, 2 * n, [v])


def basis_duplicator(n: int = 1) -> KrausChannel:
    """Measure in the computational basis and output two copies of the result."""
    d = 1 << n
    ops = []
    for i in range(d):
        k = np.zeros((d * d, d), dtype=complex)
        k[i * d + i, i] = 1.0
        ops.append(k)
    return KrausChannel(n, 2 * n, ops)


def copying_error(t: KrausChannel, rho) -> float:
    """``sqrt(1 - F(rho (x) rho, T(rho)))``."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho)
    if t.input_qubits != n or t.output_qubits != 2 * n:
        raise ArgumentError("copying error needs a channel from n to 2n qubits")
    f = fidelity(tensor(rho, rho), apply_channel(t, rho))
    return math.sqrt(max(0.0, 1.0 - f))


def random_channel(in_qubits: int, env_qubits: int, seed: int, out_qubits: int | None = None) -> KrausChannel:
    """Channel obtained from a seeded random isometry.

    A complex Gaussian matrix of shape ``(2**(out+env), 2**in)`` is
    orthonormalized by QR; the isometry is then cut into ``2**env`` Kraus
    blocks. ``out_qubits`` defaults to ``in_qubits``.
    """
    out = in_qubits if out_qubits is None else out_qubits
    if min(in_qubits, env_qubits, out) < 0:
        raise ArgumentError("qubit counts must be non-negative")
    _check_cap(max(in_qubits, out) + env_qubits)
    din, dout, denv = 1 << in_qubits, 1 << out, 1 << env_qubits
    if dout * denv < din:
        raise ArgumentError("isometry needs out+env >= in qubits")
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(dout * denv, din)) + 1j * rng.normal(size=(dout * denv, din))
    q, r = np.linalg.qr(g)
    # fix the phase ambiguity of QR so the sample is Haar distributed
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    iso = q.reshape(dout, denv, din)
    ops = [iso[:, e, :].copy() for e in range(denv)]
    return KrausChannel(in_qubits, out, ops)


# ---------------------------------------------------------------------------
# Gram-Schmidt and the packing bound


def gram_schmidt_orthogonalize(vs, rank_tol: float = 1e-8):
    """Classical Gram-Schmidt on a list of state vectors.

    Returns ``(orthonormal, unnormalized)`` where
    ``unnormalized[i] = vs[i] - sum_{j<i} <e_j|vs[i]> e_j`` and
    ``orthonormal[i]`` is its normalization.

    Raises:
        DegeneracyError: if the smallest singular value of the stacked
            vectors is at most ``rank_tol``.
    """
    vs = [np.asarray(v, dtype=complex).reshape(-1) for v in vs]
    if not vs:
        return [], []
    dims = {v.size for v in vs}
    if len(dims) != 1:
        raise ArgumentError("vectors have different dimensions")
    stack = np.stack(vs, axis=1)
    if len(vs) > stack.shape[0] or np.linalg.svd(stack, compute_uv=False)[-1] <= rank_tol:
        raise DegeneracyError("vectors are numerically linearly dependent")
    es, tildes = [], []
    for v in vs:
        t = v.copy()
        for e in es:
            t = t - np.vdot(e, v) * e
        tildes.append(t)
        es.append(t / np.linalg.norm(t))
    return es, tildes


def a_sequence(j_max: int) -> list[int]:
    """``a_0 = 1``, ``a_j = a_{j-1}**2 + a_{j-1}`` for ``j = 0..j_max``."""
    out = [1]
    for _ in range(j_max):
        out.append(out[-1] ** 2 + out[-1])
    return out


_DELTA0_MAX_N = 16


def delta0(n_dim: int, variant: str = "pure", exact: bool = False, prec_bits: int = 192):
    """Fidelity threshold below which a set of ``N``-dimensional states
    must have at most ``N`` members.

    ``pure``: ``((1 - sqrt(1 - 1/N)) / (1 + 2**((3**N + 1)/2)))**2``;
    ``mixed``: the pure value divided by ``N``, squared.

    Evaluated in the log2 domain with ``prec_bits`` of mantissa, returning an
    ``mpmath.mpf``. With ``exact=True`` a :class:`fractions.Fraction` is
    returned, which is only possible when ``1 - 1/N`` is a rational square
    (that is, ``N == 1``).

    Raises:
        CapacityError: for ``N > 16``.
    """
    if n_dim < 1:
        raise ArgumentError("n_dim must be at least 1")
    if n_dim > _DELTA0_MAX_N:
        raise CapacityError(f"delta0 supports N <= {_DELTA0_MAX_N}")
    if variant not in ("pure", "mixed"):
        raise ArgumentError(f"unknown variant {variant!r}")
    # 3**N + 1 is always even, so the power of two is an integer
    half_exp = (3**n_dim + 1) // 2
    if exact:
        if n_dim != 1:
            raise ArgumentError("delta0 is irrational for N > 1; use exact=False")
        pure = Fraction(1, 1 + 2**half_exp) ** 2
        return pure if variant == "pure" else (pure / n_dim) ** 2
    with mpmath.workprec(prec_bits):
        n = mpmath.mpf(n_dim)
        # 1 - sqrt(1 - 1/N) rewritten to avoid cancellation
        num = (1 / n) / (1 + mpmath.sqrt(1 - 1 / n))
        log_den = half_exp + mpmath.log(1 + mpmath.power(2, -half_exp), 2)
        log_pure = 2 * (mpmath.log(num, 2) - log_den)
        if variant == "mixed":
            log_val = 2 * (log_pure - mpmath.log(n, 2))
        else:
            log_val = log_pure
        return +mpmath.power(2, log_val)


# ---------------------------------------------------------------------------
# JSON interchange


def state_to_json(rho) -> str:
    """Serialize as ``{"qubits": n, "rows": [[[re, im], ...], ...]}``."""
    rho = np.asarray(rho, dtype=complex)
    rows = [[[float(z.real), float(z.imag)] for z in row] for row in rho]
    return json.dumps({"qubits": num_qubits(rho), "rows": rows})


def state_from_json(text: str, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Parse the JSON form produced by :func:`state_to_json` and validate it."""
    try:
        obj = json.loads(text)
        n = int(obj["qubits"])
        rows = obj["rows"]
        rho = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (ValueError, KeyError, TypeError) as exc:
        raise DecodeError(f"malformed state JSON: {exc}") from exc
    if rho.shape != (1 << n, 1 << n):
        raise DecodeError(f"expected {1 << n}x{1 << n} rows for {n} qubits")
    try:
        return validate_density(rho, tol)
    except ValidationError as exc:
        raise DecodeError(str(exc)) from exc
