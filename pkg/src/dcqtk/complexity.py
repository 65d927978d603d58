"""Budgeted complexity estimates backed by replayable witness programs.

Every estimate is an upper bound: the shortest program found by a
length-lex search within a :class:`SearchBudget`, together with the program
itself so the bound can be re-checked. When nothing qualifies the bound is
``math.inf`` and no witness is attached.

Witness format
--------------
Witnesses are programs for an extended reference machine. A program is either
``"0" + asm`` (a DCQ-ASM program run by :func:`dcqtk.machine.universal_run`)
or ``header + payload`` where the header selects one of a few built-in
routines and the payload, when present, is again a witness:

========  ===========  =======================================================
header    routine      behaviour on classical input ``x``
========  ===========  =======================================================
1000      SIM          run the payload on ``x`` with a density-matrix
                       simulator and print its state as matrix text (bits)
1001      FROMTEXT     ``k = x``; run the payload on ``2k``, read matrix text,
                       output the nearest directly computable state at ``k``
1010      ALG2         ``x = (text, k)``; nearest state to the text at ``k``
1011      ALG2X2       ``x = (text, k)``; two copies of the nearest state at
                       ``2k``
1100      IGNORE       ``x = (c, k)``; run the payload on ``k`` alone
1101      ECHO_THEN    ``x = (c, k)``; quantum input followed by the payload's
                       output on ``k``
1110      ALG2_THEN    ``x = (text, k)``; nearest state at ``2k`` followed by
                       the payload's output on ``2k``
11110     THEN_ALG2    as ALG2_THEN with the two factors swapped
11111     FEED         ``x = (text, k)``; nearest state at ``4k`` fed as the
                       quantum input of the payload run on ``("", 2k)``
========  ===========  =======================================================

Routine bookkeeping (decoding, the nearest-state search) is not metered; only
nested DCQ-ASM runs are bounded by ``step_cap``. The header lengths are the
additive constants that relate the different estimates, see
:data:`C_CONV`, :data:`C_ECHO`, :data:`C_COPY` and :data:`C_WRAP`.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import qmath
from .encoding import (
    bits_to_text,
    decode_matrix,
    decode_natural,
    decode_tuple,
    encode_matrix,
    encode_natural,
    encode_tuple,
    is_bits,
    text_to_bits,
)
from .enumerate import nearest_directly_computable
from .errors import (
    ArgumentError,
    CapacityError,
    DecodeError,
    DegeneracyError,
    ParseError,
    ValidationError,
)
from .machine import (
    _CODES,
    _OPS_WITH_ADDR,
    _OPS_WITH_SYM,
    _SYM_CODES,
    AsmRun,
    Instruction,
    MatrixWindow,
    _encode_addr,
    parse_program,
    read_output,
    serialize_program,
)

__all__ = [
    "INFINITY",
    "ROUTINES",
    "C_CONV",
    "C_ECHO",
    "C_COPY",
    "C_WRAP",
    "C_IGNORE",
    "ECHO_WITNESS",
    "SearchBudget",
    "Contract",
    "Witness",
    "Outcome",
    "ComplexityCertificate",
    "parse_witness",
    "routine",
    "asm_witness",
    "run_witness",
    "witnesses_of_length",
    "representation_bits",
    "k_classical_bounded",
    "k_direct_bounded",
    "k_bounded",
    "k_conditional_bounded",
    "k_representation_bounded",
    "prefix",
    "suffix",
    "InfoProfile",
    "information_profile",
    "CounterexampleSpec",
    "counterexample_sigma",
    "counterexample_family",
    "ChainGap",
    "chain_gap",
    "representation_equivalence",
    "conditional_representation_gap",
]

INFINITY = math.inf

ROUTINES = {
    "1000": "SIM",
    "1001": "FROMTEXT",
    "1010": "ALG2",
    "1011": "ALG2X2",
    "1100": "IGNORE",
    "1101": "ECHO_THEN",
    "1110": "ALG2_THEN",
    "11110": "THEN_ALG2",
    "11111": "FEED",
}
_HEADER = {name: h for h, name in ROUTINES.items()}
_NO_PAYLOAD = frozenset({"ALG2", "ALG2X2"})

ECHO_WITNESS = "0" + _CODES["HALT"]
C_CONV = max(len(_HEADER["SIM"]), len(_HEADER["FROMTEXT"]))
C_ECHO = max(len(ECHO_WITNESS), len(_HEADER["ECHO_THEN"]))
C_COPY = len(_HEADER["ALG2X2"])
C_WRAP = len(_HEADER["FEED"])
C_IGNORE = len(_HEADER["IGNORE"])

# ceiling for the nearest-state search inside routines
ROUTINE_MAX_S = 3 * 10**10
CONTRACT_TOL = 1e-9
DIRECT_TOL = 1e-9


# ---------------------------------------------------------------------------
# budgets


@dataclass(frozen=True)
class SearchBudget:
    """Limits of one certificate search.

    Attributes:
        max_program_len: longest witness (bits) that may be reported.
        step_cap: step bound for every nested DCQ-ASM run.
        resolution: largest ``k`` checked against the ``1/k`` contract.
        scan_len: lengths up to this value are searched exhaustively; longer
            witnesses up to ``max_program_len`` come only from hints.
            ``None`` means the whole range is searched.
    """

    max_program_len: int = 16
    step_cap: int = 4096
    resolution: int = 8
    scan_len: int | None = None

    def __post_init__(self):
        if self.max_program_len < 0:
            raise ArgumentError("max_program_len must be non-negative")
        if self.step_cap < 1 or self.resolution < 1:
            raise ArgumentError("step_cap and resolution must be positive")
        if self.scan_len is not None and self.scan_len < 0:
            raise ArgumentError("scan_len must be non-negative")

    @property
    def search_space_size(self) -> int:
        """Number of bit strings of length at most ``max_program_len``."""
        return (1 << (self.max_program_len + 1)) - 1

    @property
    def exhaustive_len(self) -> int:
        if self.scan_len is None:
            return self.max_program_len
        return min(self.scan_len, self.max_program_len)

    def to_dict(self) -> dict:
        return {
            "max_program_len": self.max_program_len,
            "step_cap": self.step_cap,
            "resolution": self.resolution,
            "scan_len": self.scan_len,
            "search_space_size": self.search_space_size,
        }


# ---------------------------------------------------------------------------
# witnesses


@dataclass(frozen=True)
class Witness:
    """Parsed witness program."""

    bits: str
    kind: str  # "ASM" or a routine name
    program: tuple | None = None
    payload: "Witness | None" = None

    def __len__(self):
        return len(self.bits)


def asm_witness(program) -> str:
    """Witness bits of a DCQ-ASM program (parsed, bits or text)."""
    from .machine import as_program

    return "0" + serialize_program(as_program(program))


def routine(name: str, payload: str = "") -> str:
    """Witness bits for a built-in routine wrapped around ``payload``."""
    if name not in _HEADER:
        raise ArgumentError(f"unknown routine {name!r}")
    if (name in _NO_PAYLOAD) != (payload == ""):
        raise ArgumentError(f"routine {name} {'takes no' if name in _NO_PAYLOAD else 'needs a'} payload")
    return _HEADER[name] + payload


def parse_witness(bits: str) -> Witness:
    """Parse witness bits; the whole string must be consumed.

    Raises:
        ParseError: if the bits do not form a witness.
    """
    if not bits or not is_bits(bits):
        raise ParseError("a witness is a non-empty binary string")
    if bits[0] == "0":
        return Witness(bits, "ASM", program=parse_program(bits[1:]))
    for h, name in ROUTINES.items():
        if bits.startswith(h):
            rest = bits[len(h) :]
            if name in _NO_PAYLOAD:
                if rest:
                    raise ParseError(f"routine {name} takes no payload")
                return Witness(bits, name)
            return Witness(bits, name, payload=parse_witness(rest))
    raise ParseError("incomplete routine header")


@lru_cache(maxsize=None)
def _asm_of_length(length: int) -> tuple:
    """Well-formed DCQ-ASM programs of exactly ``length`` bits, sorted."""
    halt = _CODES["HALT"]
    if length < len(halt):
        return ()
    items = []
    for op, code in _CODES.items():
        if op == "HALT":
            continue
        syms = [(s, c) for s, c in _SYM_CODES.items()] if op in _OPS_WITH_SYM else [(None, "")]
        for s, sc in syms:
            items.append((op, s, code + sc))
    max_instr = length // 2 + 1
    addrs = [(a, _encode_addr(a)) for a in range(max_instr)]
    found = []

    def rec(instrs, bits, remaining):
        if remaining == len(halt):
            n = len(instrs) + 1
            if all(ins.addr is None or ins.addr < n for ins in instrs):
                prog = tuple(instrs) + (Instruction("HALT"),)
                found.append((bits + halt, prog))
        for op, s, code in items:
            if op in _OPS_WITH_ADDR:
                for a, ac in addrs:
                    cost = len(code) + len(ac)
                    if remaining - cost >= len(halt):
                        rec(instrs + [Instruction(op, s, a)], bits + code + ac, remaining - cost)
            elif remaining - len(code) >= len(halt):
                rec(instrs + [Instruction(op)], bits + code, remaining - len(code))

    rec([], "", length)
    found.sort()
    return tuple(found)


@lru_cache(maxsize=None)
def witnesses_of_length(length: int) -> tuple:
    """All witnesses of exactly ``length`` bits in lexicographic order."""
    out = [Witness("0" + b, "ASM", program=p) for b, p in _asm_of_length(length - 1)] if length >= 1 else []
    for h, name in ROUTINES.items():
        rest = length - len(h)
        if name in _NO_PAYLOAD:
            if rest == 0:
                out.append(Witness(h, name))
        elif rest > 0:
            out.extend(Witness(h + w.bits, name, payload=w) for w in witnesses_of_length(rest))
    out.sort(key=lambda w: w.bits)
    return tuple(out)


# ---------------------------------------------------------------------------
# running witnesses


@dataclass
class Outcome:
    halted: bool
    classical_output: str = ""
    quantum_output: np.ndarray | None = None


_FAIL = Outcome(False)


@lru_cache(maxsize=4096)
def _nearest(k: int, text: str, precision: int):
    try:
        r = nearest_directly_computable(k, text, max_s=ROUTINE_MAX_S, precision_digits=precision)
    except (CapacityError, DecodeError):
        return None
    if r.exhausted:
        return None
    r.state.setflags(write=False)
    return r.state


def _split_conditional(x: str):
    """``(text, k)`` from a tupled conditional input, or ``None``."""
    try:
        c, kb = decode_tuple(x, 2)
    except DecodeError:
        return None
    return c, max(1, decode_natural(kb))


def _text_of(bits: str):
    try:
        return bits_to_text(bits)
    except DecodeError:
        return None


def _tensor(a, b):
    n = qmath.num_qubits(a) + qmath.num_qubits(b)
    if n > qmath.get_qubit_cap():
        return None
    return qmath.tensor(a, b)


def run_witness(w, x: str = "", rho_in=None, step_cap: int = 4096, precision: int = 12) -> Outcome:
    """Run a witness (bits or parsed) on ``(x; rho_in)``.

    Failures of any kind (no halt within ``step_cap``, undecodable routine
    input, capacity overflow, exhausted nearest-state search) are reported as
    a non-halting outcome.
    """
    if isinstance(w, str):
        w = parse_witness(w)
    try:
        return _run(w, x, rho_in, step_cap, precision)
    except (CapacityError, DecodeError, ParseError):
        return _FAIL


def _run(w: Witness, x, rho_in, step_cap, precision) -> Outcome:
    kind = w.kind
    if kind == "ASM":
        res = AsmRun(w.program, x, rho_in).run(step_cap).result()
        if not res.halted:
            return _FAIL
        return Outcome(True, res.classical_output, res.quantum_output)
    if kind == "SIM":
        if w.payload.kind == "ASM":
            run = AsmRun(w.payload.program, x, rho_in, window_cls=MatrixWindow).run(step_cap)
            if not run.halted:
                return _FAIL
            _, state = read_output(run.config)
        else:
            inner = _run(w.payload, x, rho_in, step_cap, precision)
            if not inner.halted:
                return _FAIL
            state = inner.quantum_output
        text = encode_matrix(state, precision).text
        return Outcome(True, text_to_bits(text), qmath.empty_state())
    if kind == "FROMTEXT":
        k = max(1, decode_natural(x))
        inner = _run(w.payload, encode_natural(2 * k), None, step_cap, precision)
        if not inner.halted:
            return _FAIL
        text = _text_of(inner.classical_output)
        if text is None:
            return _FAIL
        decode_matrix(text, precision)
        st = _nearest(k, text, precision)
        return _FAIL if st is None else Outcome(True, "", st)

    split = _split_conditional(x)
    if split is None:
        return _FAIL
    c, k = split
    if kind == "IGNORE":
        inner = _run(w.payload, encode_natural(k), None, step_cap, precision)
        return Outcome(inner.halted, "", inner.quantum_output) if inner.halted else _FAIL
    if kind == "ECHO_THEN":
        inner = _run(w.payload, encode_natural(k), None, step_cap, precision)
        if not inner.halted:
            return _FAIL
        first = qmath.empty_state() if rho_in is None else np.asarray(rho_in, dtype=complex)
        if first.ndim == 1:
            first = qmath.density(first)
        out = _tensor(first, inner.quantum_output)
        return _FAIL if out is None else Outcome(True, "", out)

    text = _text_of(c)
    if text is None:
        return _FAIL
    decode_matrix(text, precision)
    if kind == "ALG2":
        st = _nearest(k, text, precision)
        return _FAIL if st is None else Outcome(True, "", st)
    if kind == "ALG2X2":
        st = _nearest(2 * k, text, precision)
        out = None if st is None else _tensor(st, st)
        return _FAIL if out is None else Outcome(True, "", out)
    if kind in ("ALG2_THEN", "THEN_ALG2"):
        st = _nearest(2 * k, text, precision)
        if st is None:
            return _FAIL
        inner = _run(w.payload, encode_natural(2 * k), None, step_cap, precision)
        if not inner.halted:
            return _FAIL
        a, b = (st, inner.quantum_output) if kind == "ALG2_THEN" else (inner.quantum_output, st)
        out = _tensor(a, b)
        return _FAIL if out is None else Outcome(True, "", out)
    if kind == "FEED":
        st = _nearest(4 * k, text, precision)
        if st is None:
            return _FAIL
        inner = _run(w.payload, encode_tuple(["", encode_natural(2 * k)]), st, step_cap, precision)
        return Outcome(True, "", inner.quantum_output) if inner.halted else _FAIL
    raise ParseError(f"unknown witness kind {kind!r}")


# ---------------------------------------------------------------------------
# contracts and certificates


def representation_bits(rho, precision: int = 12) -> str:
    """Bit string of the canonical matrix text of ``rho``."""
    return text_to_bits(encode_matrix(rho, precision).text)


def _json_state(rho):
    return None if rho is None else json.loads(qmath.state_to_json(rho))


@dataclass(frozen=True, eq=False)
class Contract:
    """What a witness must do for a given quantity.

    Kinds:
        ``classical``: on input ``y`` halt with classical output ``x``.
        ``direct``: on blank input halt with quantum output equal to
        ``target`` entrywise within 1e-9.
        ``approx``: on input ``k`` halt with quantum output within ``1/k``.
        ``conditional``: as ``approx`` on input ``(x, k)`` with quantum
        input ``sigma``.
        ``representation``: on input ``k`` halt printing matrix text within
        ``1/k`` of ``target``.
    """

    kind: str
    target: np.ndarray | None = None
    x: str = ""
    y: str = ""
    sigma: np.ndarray | None = None
    precision: int = 12

    def verified_resolution(self, budget: SearchBudget) -> int:
        return 1 if self.kind in ("classical", "direct") else budget.resolution

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "target": _json_state(self.target),
            "x": self.x,
            "y": self.y,
            "sigma": _json_state(self.sigma),
            "precision": self.precision,
        }


def _close(out, target, k) -> bool:
    if out is None or out.shape != target.shape:
        return False
    return qmath.trace_distance(out, target) <= 1.0 / k + CONTRACT_TOL


def satisfies(w, contract: Contract, budget: SearchBudget, resolution: int | None = None) -> bool:
    """Whether witness ``w`` meets ``contract`` up to ``resolution``."""
    if isinstance(w, str):
        try:
            w = parse_witness(w)
        except ParseError:
            return False
    cap, p = budget.step_cap, contract.precision
    kind = contract.kind
    if kind == "classical":
        out = run_witness(w, contract.y, None, cap, p)
        return out.halted and out.classical_output == contract.x
    if kind == "direct":
        out = run_witness(w, "", None, cap, p)
        if not out.halted or out.quantum_output.shape != contract.target.shape:
            return False
        return float(np.max(np.abs(out.quantum_output - contract.target))) <= DIRECT_TOL
    res = budget.resolution if resolution is None else resolution
    for k in range(1, res + 1):
        if kind == "approx":
            out = run_witness(w, encode_natural(k), None, cap, p)
            ok = out.halted and _close(out.quantum_output, contract.target, k)
        elif kind == "conditional":
            inp = encode_tuple([contract.x, encode_natural(k)])
            out = run_witness(w, inp, contract.sigma, cap, p)
            ok = out.halted and _close(out.quantum_output, contract.target, k)
        elif kind == "representation":
            out = run_witness(w, encode_natural(k), None, cap, p)
            ok = False
            if out.halted:
                text = _text_of(out.classical_output)
                if text is not None:
                    try:
                        ok = _close(decode_matrix(text, p), contract.target, k)
                    except DecodeError:
                        ok = False
        else:
            raise ArgumentError(f"unknown contract kind {kind!r}")
        if not ok:
            return False
    return True


@dataclass(frozen=True, eq=False)
class ComplexityCertificate:
    """A budgeted upper bound with the program that attains it."""

    bound_bits: int | float
    witness: str | None
    budget: SearchBudget
    verified_resolution: int
    contract: Contract
    candidates_checked: int = 0
    exhaustive_len: int = 0

    @property
    def finite(self) -> bool:
        return self.witness is not None

    def replay(self) -> bool:
        """Re-run the witness against the contract; infinite bounds replay trivially."""
        if self.witness is None:
            return self.bound_bits == INFINITY
        return len(self.witness) == self.bound_bits and satisfies(
            self.witness, self.contract, self.budget, self.verified_resolution
        )

    def to_dict(self) -> dict:
        return {
            "quantity": self.contract.kind,
            "bound_bits": "inf" if self.witness is None else int(self.bound_bits),
            "witness": self.witness,
            "verified_resolution": self.verified_resolution,
            "budget": self.budget.to_dict(),
            "exhaustive_len": self.exhaustive_len,
            "candidates_checked": self.candidates_checked,
            "contract": self.contract.to_dict(),
        }


def _search(contract: Contract, budget: SearchBudget, hints=(), workers: int = 1) -> ComplexityCertificate:
    best = None
    for h in sorted(set(hints), key=lambda b: (len(b), b)):
        if len(h) <= budget.max_program_len and satisfies(h, contract, budget):
            best = h
            break
    limit = budget.exhaustive_len
    if best is not None:
        limit = min(limit, len(best))
    checked = 0
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for length in range(limit + 1):
            cands = [
                w for w in witnesses_of_length(length) if best is None or (len(w), w.bits) < (len(best), best)
            ]
            if not cands:
                continue
            if pool is None:
                hit = None
                for w in cands:
                    checked += 1
                    if satisfies(w, contract, budget):
                        hit = w
                        break
            else:
                flags = list(pool.map(lambda w: satisfies(w, contract, budget), cands))
                # count as the serial scan would, so reports are thread-invariant
                first = next((i for i, f in enumerate(flags) if f), None)
                checked += len(cands) if first is None else first + 1
                hit = None if first is None else cands[first]
            if hit is not None:
                best = hit.bits
                break
    finally:
        if pool is not None:
            pool.shutdown()
    if best is None:
        cert = ComplexityCertificate(INFINITY, None, budget, 0, contract, checked, budget.exhaustive_len)
    else:
        cert = ComplexityCertificate(
            len(best), best, budget, contract.verified_resolution(budget), contract, checked, budget.exhaustive_len
        )
    if not cert.replay():
        raise ValidationError(f"certificate failed to replay: {cert.to_dict()}")
    return cert


def _state(rho) -> np.ndarray:
    rho = qmath.validate_density(rho)
    if qmath.num_qubits(rho) > qmath.get_qubit_cap():
        raise CapacityError("state exceeds the qubit cap")
    return rho


def k_classical_bounded(x: str, y: str, budget: SearchBudget, hints=(), workers: int = 1) -> ComplexityCertificate:
    """Shortest witness printing ``x`` from input ``y``.

    Args:
        x: required classical output.
        y: classical input.
        budget: search limits.
        hints: extra candidate witnesses; each is checked before use.
        workers: threads used per search length.
    """
    if not (is_bits(x) and is_bits(y)):
        raise ArgumentError("x and y must be binary strings")
    return _search(Contract("classical", x=x, y=y), budget, hints, workers)


def k_direct_bounded(rho, budget: SearchBudget, hints=(), workers: int = 1) -> ComplexityCertificate:
    """Shortest witness preparing ``rho`` from blank input (entrywise 1e-9)."""
    return _search(Contract("direct", target=_state(rho)), budget, hints, workers)


def k_bounded(rho, budget: SearchBudget, hints=(), workers: int = 1) -> ComplexityCertificate:
    """Shortest witness whose output on ``k`` is within ``1/k`` of ``rho`` for all ``k <= resolution``."""
    return _search(Contract("approx", target=_state(rho)), budget, hints, workers)


def k_conditional_bounded(
    rho, x: str, sigma, budget: SearchBudget, hints=(), precision: int = 12, workers: int = 1
) -> ComplexityCertificate:
    """As :func:`k_bounded` with classical input ``(x, k)`` and quantum input ``sigma``.

    ``sigma=None`` is the empty quantum input. Pass
    ``representation_bits(state, precision)`` as ``x`` to condition on the
    classical description of a state.
    """
    if not is_bits(x):
        raise ArgumentError("x must be a binary string")
    sig = None if sigma is None else _state(sigma)
    return _search(Contract("conditional", target=_state(rho), x=x, sigma=sig, precision=precision), budget, hints, workers)


def k_representation_bounded(rho, budget: SearchBudget, hints=(), precision: int = 12, workers: int = 1):
    """Shortest witness printing matrix text within ``1/k`` of ``rho`` on input ``k``."""
    return _search(Contract("representation", target=_state(rho), precision=precision), budget, hints, workers)


# ---------------------------------------------------------------------------
# prefixes and information profiles


def prefix(rho, m: int) -> np.ndarray:
    """Reduced state of the first ``m`` qubits."""
    rho = np.asarray(rho, dtype=complex)
    n = qmath.num_qubits(rho)
    if not 0 < m <= n:
        raise ArgumentError(f"prefix length must be in 1..{n}")
    return qmath.partial_trace(rho, m)


def suffix(rho, m: int) -> np.ndarray:
    """Reduced state of the qubits after the first ``m``."""
    rho = np.asarray(rho, dtype=complex)
    n = qmath.num_qubits(rho)
    if not 0 <= m < n:
        raise ArgumentError(f"split must be in 0..{n - 1}")
    da, db = 1 << m, 1 << (n - m)
    return np.einsum("jajb->ab", rho.reshape(da, db, da, db))


def _diff(*terms):
    """``terms[0] - terms[1] - ...`` on bounds, ``None`` if any is infinite."""
    if any(t == INFINITY for t in terms):
        return None
    return int(terms[0]) - sum(int(t) for t in terms[1:])


@dataclass
class InfoProfile:
    """Mutual-information variants from one shared budget.

    ``complete`` is false when any component bound is infinite; the derived
    quantities are then ``None``.
    """

    i1: int | None
    i2: int | None
    iQ: int | None
    c_corr: int | None
    complete: bool
    certificates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "i1": self.i1,
            "i2": self.i2,
            "iQ": self.iQ,
            "c_corr": self.c_corr,
            "complete": self.complete,
            "certificates": {k: c.to_dict() for k, c in self.certificates.items()},
        }


def information_profile(
    rho_ab, split_m: int, budget: SearchBudget, precision: int = 12, workers: int = 1
) -> InfoProfile:
    """Certificate-level mutual information between the first ``split_m`` qubits and the rest."""
    rho_ab = _state(rho_ab)
    n = qmath.num_qubits(rho_ab)
    if not 0 < split_m < n:
        raise ArgumentError(f"split must be in 1..{n - 1}")
    rho_a, rho_b = prefix(rho_ab, split_m), suffix(rho_ab, split_m)
    xb = representation_bits(rho_b, precision)
    ka = k_bounded(rho_a, budget, workers=workers)
    kb = k_bounded(rho_b, budget, workers=workers)
    kab = k_bounded(rho_ab, budget, workers=workers)
    hints_a = [routine("IGNORE", ka.witness)] if ka.finite else []
    ka_b = k_conditional_bounded(rho_a, xb, None, budget, hints_a, precision, workers)
    hints_ab = [routine("IGNORE", kab.witness)] if kab.finite else []
    if ka.finite:
        hints_ab.append(routine("THEN_ALG2", ka.witness))
    kab_b = k_conditional_bounded(rho_ab, xb, None, budget, hints_ab, precision, workers)
    certs = {"K_A": ka, "K_B": kb, "K_AB": kab, "K_A|B": ka_b, "K_AB|B": kab_b}
    vals = [c.bound_bits for c in certs.values()]
    if INFINITY in vals:
        return InfoProfile(None, None, None, None, False, certs)
    i1 = _diff(ka.bound_bits, ka_b.bound_bits)
    i2 = _diff(ka.bound_bits + kb.bound_bits, kab.bound_bits)
    iq = _diff(ka.bound_bits, kab_b.bound_bits)
    c_corr = _diff(kab_b.bound_bits, ka_b.bound_bits)
    return InfoProfile(i1, i2, iq, c_corr, True, certs)


# ---------------------------------------------------------------------------
# correlated family with fixed marginals


@dataclass(frozen=True, eq=False)
class CounterexampleSpec:
    """Two marginals, two eigen-index pairs and a mixing weight.

    Eigen-indices refer to ``numpy.linalg.eigh`` order (ascending
    eigenvalues) of each marginal.
    """

    rho_A: np.ndarray
    rho_B: np.ndarray
    r: int
    r_prime: int
    s: int
    s_prime: int
    lam: float | Fraction = 0.5

    def __post_init__(self):
        qmath.validate_density(self.rho_A)
        qmath.validate_density(self.rho_B)
        if self.r == self.r_prime or self.s == self.s_prime:
            raise ArgumentError("r != r' and s != s' are required")
        da, db = len(self.rho_A), len(self.rho_B)
        for i, d in ((self.r, da), (self.r_prime, da), (self.s, db), (self.s_prime, db)):
            if not 0 <= i < d:
                raise ArgumentError("eigen-index out of range")
        if not 0 <= float(self.lam) <= 1:
            raise ArgumentError("lambda must lie in [0, 1]")
        alpha, _ = self.eigen_a
        beta, _ = self.eigen_b
        if min(alpha[self.r], alpha[self.r_prime], beta[self.s], beta[self.s_prime]) <= qmath.DEFAULT_TOL.psd_tol:
            raise DegeneracyError("selected eigenvalues must be non-zero")

    @property
    def eigen_a(self):
        vals, vecs = np.linalg.eigh(np.asarray(self.rho_A, dtype=complex))
        return np.clip(vals, 0, None), vecs

    @property
    def eigen_b(self):
        vals, vecs = np.linalg.eigh(np.asarray(self.rho_B, dtype=complex))
        return np.clip(vals, 0, None), vecs

    @property
    def gamma(self) -> float:
        alpha, _ = self.eigen_a
        beta, _ = self.eigen_b
        return math.sqrt(alpha[self.r] * alpha[self.r_prime] * beta[self.s] * beta[self.s_prime])


def _coherence(spec: CounterexampleSpec) -> np.ndarray:
    _, ua = spec.eigen_a
    _, ub = spec.eigen_b
    v1 = np.kron(ua[:, spec.r], ub[:, spec.s])
    v2 = np.kron(ua[:, spec.r_prime], ub[:, spec.s_prime])
    op = np.outer(v1, v2.conj())
    return op + op.conj().T


def counterexample_sigma(spec: CounterexampleSpec) -> np.ndarray:
    """Product of the marginals plus the maximal coherence between the two selected pairs."""
    prod = np.kron(np.asarray(spec.rho_A, dtype=complex), np.asarray(spec.rho_B, dtype=complex))
    return prod + spec.gamma * _coherence(spec)


def counterexample_family(spec: CounterexampleSpec) -> np.ndarray:
    """Mixture ``lam * (rho_A x rho_B) + (1 - lam) * sigma`` with the same marginals."""
    prod = np.kron(np.asarray(spec.rho_A, dtype=complex), np.asarray(spec.rho_B, dtype=complex))
    lam = float(spec.lam)
    if lam == 1.0:
        return prod
    return prod + (1.0 - lam) * spec.gamma * _coherence(spec)


# ---------------------------------------------------------------------------
# chain-rule gap and cross-representation checks


@dataclass
class ChainGap:
    """``K(rho) - K(prefix) - K(rho | prefix text)`` with its log normalizer."""

    gap: int | None
    normalizer: float | None
    certificates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "gap": self.gap,
            "normalizer": self.normalizer,
            "certificates": {k: c.to_dict() for k, c in self.certificates.items()},
        }


def chain_gap(rho, split_m: int, budget: SearchBudget, precision: int = 12, workers: int = 1) -> ChainGap:
    """Measured chain-rule gap for the split after ``split_m`` qubits."""
    rho = _state(rho)
    n = qmath.num_qubits(rho)
    sigma = prefix(rho, split_m)
    k_rho = k_bounded(rho, budget, workers=workers)
    k_sig = k_bounded(sigma, budget, workers=workers)
    hints = []
    if split_m < n:
        k_rest = k_bounded(suffix(rho, split_m), budget, workers=workers)
        if k_rest.finite:
            hints.append(routine("ALG2_THEN", k_rest.witness))
    else:
        hints.append(routine("ALG2"))
    k_cond = k_conditional_bounded(rho, representation_bits(sigma, precision), None, budget, hints, precision, workers)
    certs = {"K": k_rho, "K_prefix": k_sig, "K_given_prefix": k_cond}
    gap = _diff(k_rho.bound_bits, k_sig.bound_bits, k_cond.bound_bits)
    norm = None if k_rho.bound_bits == INFINITY else math.log2(n * k_rho.bound_bits)
    return ChainGap(gap, norm, certs)


def representation_equivalence(rho, budget: SearchBudget, precision: int = 12, workers: int = 1) -> dict:
    """Compare the state estimate with the estimate for its matrix text.

    The text estimate is seeded with the simulate-and-print wrapper around
    the state witness and the state estimate with the text-to-state wrapper
    around the text witness, so ``|difference| <= C_CONV`` whenever both
    are finite.
    """
    k_state = k_bounded(rho, budget, workers=workers)
    hints = [routine("SIM", k_state.witness)] if k_state.finite else []
    k_repr = k_representation_bounded(rho, budget, hints, precision, workers)
    if k_repr.finite and k_repr.bound_bits + C_CONV < k_state.bound_bits:
        k_state = k_bounded(rho, budget, [routine("FROMTEXT", k_repr.witness)], workers)
    diff = _diff(k_state.bound_bits, k_repr.bound_bits)
    return {
        "K_state": k_state,
        "K_repr": k_repr,
        "difference": diff,
        "c_conv": C_CONV,
        "holds": diff is not None and abs(diff) <= C_CONV,
    }


def conditional_representation_gap(rho, sigma, budget: SearchBudget, precision: int = 12, workers: int = 1) -> dict:
    """Conditioning on the text of ``sigma`` versus on a copy of ``sigma``."""
    k_quantum = k_conditional_bounded(rho, "", sigma, budget, precision=precision, workers=workers)
    hints = [routine("FEED", k_quantum.witness)] if k_quantum.finite else []
    k_text = k_conditional_bounded(
        rho, representation_bits(sigma, precision), None, budget, hints, precision, workers
    )
    diff = _diff(k_text.bound_bits, k_quantum.bound_bits)
    return {
        "K_given_text": k_text,
        "K_given_copy": k_quantum,
        "difference": diff,
        "c_wrap": C_WRAP,
        "holds": diff is None or diff <= C_WRAP,
    }
