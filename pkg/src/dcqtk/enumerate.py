"""Dovetailed enumeration of machine outputs and program sets.

Indexing convention: the enumeration index ``s`` is split by the Cantor
zig-zag into ``(input, steps)``. The input number ``i`` names the program
``encode_natural(i)`` of the reference interpreter, which is run on blank
input for exactly ``steps`` steps and then read (a forced run). Bit strings
that are not well-formed programs produce the empty output, the same as a
forced read of the blank starting configuration.

Every unbounded quantifier is replaced by an explicit budget: ``len_cap``
bounds the program space, ``step_cap`` bounds each run and ``max_s`` bounds
index searches. When a budget runs out the functions return
:data:`EXHAUSTED` (or a result flagged as exhausted) instead of looping.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qmath
from .encoding import (
    ClassicalStateRepresentation,
    decode_matrix,
    encode_matrix,
    encode_natural,
)
from .errors import ArgumentError, CapacityError, ParseError
from .machine import GATES, TWO_QUBIT, AsmRun, classical_simulate, output_qubits, parse_program, read_output

__all__ = [
    "EXHAUSTED",
    "Exhausted",
    "UNDEFINED",
    "cantor_decode",
    "cantor_pair",
    "program_for_index",
    "programs_up_to",
    "pi1",
    "NearestResult",
    "first_index",
    "nearest_directly_computable",
    "nearest_directly_computable_naive",
    "eta",
    "ProgramSetSpec",
    "ProgramSet",
    "enum_program_set",
    "enum_sigma",
    "enum_sigma_star",
    "brute_force_members",
]


class Exhausted:
    """Marker for an enumeration that ran past the end of a finite set."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EXHAUSTED"

    def __bool__(self):
        return False


EXHAUSTED = Exhausted()


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False


UNDEFINED = _Undefined()


# ---------------------------------------------------------------------------
# Cantor zig-zag


def cantor_decode(s: int) -> tuple[int, int]:
    """Split ``s`` into ``(input, steps)``.

    ``n`` is the least integer with ``s < (n+1)(n+2)/2``; then ``m = s - n``
    when ``n <= 1`` and ``m = s mod n(n+1)/2`` otherwise, and the result is
    ``(n - m, m)``.
    """
    if s < 0:
        raise ArgumentError("index must be non-negative")
    n = (math.isqrt(8 * s + 1) - 1) // 2
    # isqrt gives the largest n with n(n+1)/2 <= s, which is the least n with s < (n+1)(n+2)/2
    if n <= 1:
        m = s - n
    else:
        m = s % (n * (n + 1) // 2)
    return n - m, m


def cantor_pair(inp: int, steps: int) -> int:
    """Inverse of :func:`cantor_decode`."""
    n = inp + steps
    return n * (n + 1) // 2 + steps


# ---------------------------------------------------------------------------
# program space


@lru_cache(maxsize=1 << 20)
def program_for_index(i: int):
    """Parsed program named by input number ``i``, or ``None`` if malformed."""
    try:
        return parse_program(encode_natural(i))
    except ParseError:
        return None


def programs_up_to(len_cap: int) -> list[tuple[str, tuple]]:
    """All well-formed programs of at most ``len_cap`` bits in length-lex order."""
    out = []
    for i in range((1 << (len_cap + 1)) - 1):
        p = program_for_index(i)
        if p is not None:
            out.append((encode_natural(i), p))
    return out


# ---------------------------------------------------------------------------
# state generator


def pi1(s: int, mode: str = "quantum", precision_digits: int = 12):
    """Directly computable state number ``s``.

    Args:
        s: enumeration index.
        mode: ``"quantum"`` returns a density matrix from the tensor
            simulator; ``"classical"`` returns the
            :class:`~dcqtk.encoding.ClassicalStateRepresentation` produced by
            the matrix-text simulator.
        precision_digits: decimal places for classical mode.

    Raises:
        CapacityError: if the decoded run outgrows the qubit cap.
    """
    inp, steps = cantor_decode(s)
    prog = program_for_index(inp)
    if mode == "quantum":
        if prog is None:
            return qmath.empty_state()
        return AsmRun(prog).run(steps).result().quantum_output
    if mode == "classical":
        empty = encode_matrix(qmath.empty_state(), precision_digits)
        if prog is None:
            return empty
        _, rep = classical_simulate(prog, "", empty, steps, precision_digits)
        return rep
    raise ArgumentError(f"unknown mode {mode!r}")


@dataclass
class NearestResult:
    """Outcome of the nearest-state search.

    ``exhausted`` is true when ``max_s`` was reached first; ``s`` and
    ``state`` are then ``None``.
    """

    s: int | None
    state: np.ndarray | None
    distance: float | None
    exhausted: bool = False
    program: str | None = None


def _as_matrix(sigma, precision_digits):
    if isinstance(sigma, ClassicalStateRepresentation):
        return decode_matrix(sigma.text, sigma.precision), sigma.precision
    if isinstance(sigma, str):
        return decode_matrix(sigma, precision_digits), precision_digits
    return np.asarray(sigma, dtype=complex), precision_digits


class _Probe:
    """Watches one program's forced outputs step by step.

    The forced output only changes when the tape changes or a gate touches an
    output cell, so the (costly) acceptance test runs only at those steps.
    Steps below ``min_step`` are simulated but never reported.

    Once the future is known the probe answers without simulating: after a
    halt the output is fixed, and a repeated classical configuration with no
    gate inside the cycle repeats the whole configuration. In both cases the
    accepted phases of one period decide every later step. A cycle that
    never shows an output of the wanted size also ends the probe.
    """

    def __init__(self, prog, n_qubits, accept, min_step=0):
        self.run = AsmRun(prog)
        self.n = n_qubits
        self.accept = accept
        self.min_step = min_step
        self.done = False  # nothing acceptable can follow
        self._dirty = True
        self._periodic = None  # (start, period, accepted phases)
        self._brent_key = None
        self._brent_step = 0
        self._brent_power = 1
        self._brent_lam = 0
        self._gates_since = 0
        self._hits_since = 0

    @property
    def steps(self):
        return self.run.steps

    def _accepts(self, c):
        if output_qubits(c) != self.n:
            return False
        return self.accept(read_output(c)[1])

    def _check(self):
        c = self.run.config
        if output_qubits(c) != self.n:
            return False
        self._hits_since += 1
        if self.steps < self.min_step or not self._dirty:
            return False
        self._dirty = False
        return self.accept(self.run.result().quantum_output)

    def advance_to(self, m_limit):
        """Return the first step count in ``[min_step, m_limit]`` whose output is accepted."""
        if self._periodic is not None:
            return self._answer(m_limit)
        if self.steps == 0 and self._dirty:
            if self._check():
                return 0
        while not self.done and self.steps < m_limit:
            try:
                op = self.run.advance()
            except CapacityError:
                self.done = True
                return None
            if op in ("W0", "W1", "WB", "OUT"):
                self._dirty = True
            elif op in GATES:
                self._gates_since += 1
                h = self.run.config.q_head
                lo, hi = (h, h + 1) if op in TWO_QUBIT else (h, h)
                if lo <= self.n and hi >= 1:
                    self._dirty = True
            if self._check():
                return self.steps
            if self.run.halted:
                flags = [self._accepts(self.run.config)]
                self._periodic = (self.steps, 1, flags)
                return self._answer(m_limit)
            self._detect_cycle()
            if self._periodic is not None:
                return self._answer(m_limit)
        return None

    def _answer(self, m_limit):
        start, period, flags = self._periodic
        lo = max(self.min_step, start)
        best = None
        for j, ok in enumerate(flags):
            if ok:
                t = lo + (start + j - lo) % period
                best = t if best is None else min(best, t)
        if best is None:
            self.done = True
            return None
        return best if best <= m_limit else None

    def _detect_cycle(self):
        key = self.run.config.classical_key()
        if key == self._brent_key:
            if self._hits_since == 0:
                self.done = True
            elif self._gates_since == 0:
                self._freeze(self.steps - self._brent_step)
            return
        self._brent_lam += 1
        if self._brent_lam >= self._brent_power:
            self._brent_key = key
            self._brent_step = self.steps
            self._brent_power *= 2
            self._brent_lam = 0
            self._gates_since = 0
            self._hits_since = 0

    def _freeze(self, period):
        ghost = AsmRun(self.run.program)
        ghost.config = self.run.config.copy()
        flags = []
        for _ in range(period):
            flags.append(self._accepts(ghost.config))
            ghost.advance()
        self._periodic = (self.steps, period, flags)


def first_index(accept, n_qubits: int, min_s: int = 0, max_s: int = 10**11, first_pass_steps: int = 64):
    """Smallest ``s >= min_s`` with an ``n_qubits`` state ``pi1(s)`` passing ``accept``.

    ``accept`` receives the quantum output. The scan is organised per
    program: each input number contributes its first acceptable step count
    and the minimum over programs is the answer. Returns ``None`` when no
    index up to ``max_s`` qualifies.
    """
    if n_qubits < 1:
        raise ArgumentError("first_index needs at least one qubit")
    best = None
    pending = []
    i = 0
    while True:
        base = cantor_pair(i, 0)
        limit_s = max_s if best is None else min(max_s, best - 1)
        if base > limit_s:
            break
        prog = program_for_index(i)
        min_step = _max_steps(i, min_s - 1) + 1 if min_s > 0 else 0
        m_cap = _max_steps(i, limit_s)
        if prog is not None and min_step <= m_cap:
            probe = _Probe(prog, n_qubits, accept, min_step)
            hit = probe.advance_to(min(m_cap, first_pass_steps))
            if hit is not None:
                best = cantor_pair(i, hit)
            elif not probe.done and m_cap > first_pass_steps:
                pending.append((i, probe))
        i += 1
    for i, probe in pending:
        limit_s = max_s if best is None else min(max_s, best - 1)
        if cantor_pair(i, max(probe.steps, probe.min_step)) > limit_s:
            continue
        hit = probe.advance_to(_max_steps(i, limit_s))
        if hit is not None:
            best = cantor_pair(i, hit)
    return best


def nearest_directly_computable(
    k: int,
    sigma,
    max_s: int = 10**11,
    precision_digits: int = 12,
    first_pass_steps: int = 64,
) -> NearestResult:
    """Smallest ``s`` whose classical state text is within ``1/(2k)`` of ``sigma``.

    Returns the quantum state number ``s`` together with its index. The scan
    uses :func:`first_index`, which equals a literal scan over
    ``s = 0, 1, 2, ...`` (see :func:`nearest_directly_computable_naive`)
    because malformed programs only ever output the empty state.

    Candidates are screened with the tensor simulator rounded through the
    matrix text codec; the winning index is re-checked with the classical
    simulator.

    Args:
        k: accuracy parameter, at least 1.
        sigma: target as matrix text, a representation or a matrix.
        max_s: search ceiling; if no index up to it qualifies the result is
            flagged ``exhausted``.
        precision_digits: digits used when comparing through the codec.
        first_pass_steps: step budget of the first sweep; runs still alive
            afterwards are resumed with the tighter bound found by the sweep.
    """
    if k < 1:
        raise ArgumentError("k must be at least 1")
    target, p = _as_matrix(sigma, precision_digits)
    n = qmath.num_qubits(target)
    thr = 1.0 / (2 * k)

    def accept(q):
        text = encode_matrix(q, p).text
        return qmath.trace_distance(decode_matrix(text, p), target) <= thr

    if n == 0:
        # every malformed program (including input 0) outputs the empty state
        return _finish(0, target, p, thr)
    best = first_index(accept, n, 0, max_s, first_pass_steps)
    if best is None:
        return NearestResult(None, None, None, exhausted=True)
    return _finish(best, target, p, thr)


def _max_steps(i, limit_s):
    """Largest ``m`` with ``cantor_pair(i, m) <= limit_s``."""
    n = (math.isqrt(8 * limit_s + 1) - 1) // 2  # largest diagonal starting at or below limit_s
    m = n - i
    if m < 0:
        return -1
    if cantor_pair(i, m) > limit_s:
        m -= 1
    return m


def _finish(s, target, p, thr):
    rep = pi1(s, "classical", p)
    d = qmath.trace_distance(decode_matrix(rep.text, rep.precision), target)
    if d > thr:
        raise AssertionError(f"classical re-check failed at s={s}: D={d}")
    state = pi1(s, "quantum")
    inp, _ = cantor_decode(s)
    prog = program_for_index(inp)
    return NearestResult(
        s,
        state,
        qmath.trace_distance(state, target),
        program=None if prog is None else encode_natural(inp),
    )


def nearest_directly_computable_naive(k: int, sigma, max_s: int, precision_digits: int = 12) -> NearestResult:
    """Literal scan over ``s = 0, 1, ...``; only practical for small ``max_s``."""
    target, p = _as_matrix(sigma, precision_digits)
    thr = 1.0 / (2 * k)
    for s in range(max_s + 1):
        rep = pi1(s, "classical", p)
        cand = decode_matrix(rep.text, rep.precision)
        if cand.shape == target.shape and qmath.trace_distance(cand, target) <= thr:
            state = pi1(s, "quantum")
            return NearestResult(s, state, qmath.trace_distance(state, target))
    return NearestResult(None, None, None, exhausted=True)


# ---------------------------------------------------------------------------
# program-set families


def eta(t, x: int, m: int, step_cap: int):
    """The ``m``-qubit prefix of the output of ``t`` on input ``x`` and blank quantum input.

    Returns :data:`UNDEFINED` when the run does not halt within ``step_cap``
    or outputs fewer than ``m`` qubits.
    """
    from .machine import as_program

    prog = as_program(t)
    try:
        res = AsmRun(prog, encode_natural(x)).run(step_cap).result()
    except CapacityError:
        return UNDEFINED
    if not res.halted or res.output_qubits < m:
        return UNDEFINED
    return qmath.partial_trace(res.quantum_output, m)


_FAMILIES = ("P", "P_eta", "twoP_eta", "Sigma", "SigmaStar")


@dataclass(frozen=True)
class ProgramSetSpec:
    """Parameters of one of the finite program-set families.

    Attributes:
        s: inputs ``1..s`` are checked.
        family: one of ``P``, ``P_eta``, ``twoP_eta``, ``Sigma``, ``SigmaStar``.
        eta: reference prefix state for ``P_eta`` and ``twoP_eta``.
        m: number of prefix qubits.
        len_cap: longest program (in bits) considered.
        ell: threshold exponent for ``Sigma`` and ``SigmaStar``.
        step_cap: per-run step budget.
    """

    s: int
    family: str
    eta: object = None
    m: int = 0
    len_cap: int = 12
    ell: int | None = None
    step_cap: int = 512

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ArgumentError(f"unknown family {self.family!r}")
        if self.s < 1:
            raise ArgumentError("s must be at least 1")
        if self.family in ("P_eta", "twoP_eta") and self.eta is None:
            raise ArgumentError(f"{self.family} needs eta")
        if self.family in ("Sigma", "SigmaStar") and self.ell is None:
            raise ArgumentError(f"{self.family} needs ell")


@dataclass
class _Profile:
    """Per-program run data on inputs 1..s."""

    bits: str
    rank: int  # 1-based position in the length-lex program list
    halts: bool
    budget: int  # largest halting time over the inputs
    prefixes: list = field(default_factory=list)  # eta(t, x) for x = 1..s


class ProgramSet:
    """Finite program space with cached runs, shared by all family queries.

    Args:
        len_cap: longest program in bits.
        s: largest input checked.
        m: prefix size.
        step_cap: per-run step budget.
        workers: number of threads used to run programs. Results are merged
            in program order, so they do not depend on this value.
    """

    def __init__(self, len_cap: int, s: int, m: int, step_cap: int, workers: int = 1):
        self.len_cap, self.s, self.m, self.step_cap = len_cap, s, m, step_cap
        progs = programs_up_to(len_cap)
        with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
            self.profiles = list(ex.map(self._profile, range(len(progs)), progs))

    def _profile(self, idx, item):
        bits, prog = item
        prefixes, budget = [], 0
        for x in range(1, self.s + 1):
            try:
                res = AsmRun(prog, encode_natural(x)).run(self.step_cap).result()
            except CapacityError:
                return _Profile(bits, idx + 1, False, 0)
            if not res.halted or res.output_qubits < self.m:
                return _Profile(bits, idx + 1, False, 0)
            budget = max(budget, res.steps_used)
            prefixes.append(qmath.partial_trace(res.quantum_output, self.m))
        return _Profile(bits, idx + 1, True, budget, prefixes)

    # membership -----------------------------------------------------------

    def in_p(self, prof: _Profile) -> bool:
        return prof.halts

    def in_p_eta(self, prof: _Profile, eta_state, factor: float = 1.0) -> bool:
        if not prof.halts:
            return False
        return all(
            qmath.trace_distance(prof.prefixes[x - 1], eta_state) <= factor / x
            for x in range(1, self.s + 1)
        )

    # dovetailed enumerations ----------------------------------------------

    def _dovetail(self, members):
        """Order members by the Cantor index at which their check completes."""
        return sorted(members, key=lambda p: (cantor_pair(p.rank, p.budget), p.rank))

    def members(self, family: str, eta_state=None) -> list[_Profile]:
        if family == "P":
            chosen = [p for p in self.profiles if self.in_p(p)]
        elif family == "P_eta":
            chosen = [p for p in self.profiles if self.in_p_eta(p, eta_state, 1.0)]
        elif family == "twoP_eta":
            chosen = [p for p in self.profiles if self.in_p_eta(p, eta_state, 2.0)]
        else:
            raise ArgumentError(f"members() does not handle {family!r}")
        return self._dovetail(chosen)

    def p_list(self) -> list[_Profile]:
        return self.members("P")

    def two_p_for(self, t: _Profile) -> list[_Profile]:
        """``2P_s`` around the prefix of ``t`` on input ``s``."""
        return self.members("twoP_eta", t.prefixes[self.s - 1])

    def sigma_list(self, ell: int) -> list[_Profile]:
        """Members of Sigma in the order the zig-zag schedule discovers them.

        Index ``j = 1, 2, ...`` is split into ``(r, m)`` by the Cantor
        decode; program ``r`` of ``P_s`` is added once the ``2**ell + 1``-th
        member of its relaxed set is discovered within ``m`` steps of the
        set enumerator. A set enumerator's step count for its ``i``-th member
        is that member's dovetail index plus one.
        """
        p_list = self.p_list()
        need = 2**ell + 1
        halting_time = {}
        for r, t in enumerate(p_list, start=1):
            two_p = self.two_p_for(t)
            if len(two_p) >= need:
                q = two_p[need - 1]
                halting_time[r] = cantor_pair(q.rank, q.budget) + 1
        # cantor_pair(r, m) grows with m, so program r is first picked up at
        # index cantor_pair(r, halting_time[r]); sorting on that key replays
        # the zig-zag schedule without walking every index.
        order = sorted(halting_time, key=lambda r: cantor_pair(r, halting_time[r]))
        return [p_list[r - 1] for r in order]

    def sigma_star_list(self, ell: int) -> list[_Profile]:
        """Greedy filter of the Sigma enumeration keeping members more than ``4/s`` apart."""
        kept = []
        for t in self.sigma_list(ell):
            eta_t = t.prefixes[self.s - 1]
            if all(qmath.trace_distance(eta_t, u.prefixes[self.s - 1]) > 4.0 / self.s for u in kept):
                kept.append(t)
        return kept


@lru_cache(maxsize=32)
def _program_set(len_cap, s, m, step_cap):
    return ProgramSet(len_cap, s, m, step_cap)


def _eta_matrix(e):
    if isinstance(e, ClassicalStateRepresentation):
        return decode_matrix(e.text, e.precision)
    return np.asarray(e, dtype=complex)


def _nth(lst, i):
    if i < 1:
        raise ArgumentError("enumeration indices start at 1")
    return lst[i - 1].bits if i <= len(lst) else EXHAUSTED


def enum_program_set(spec: ProgramSetSpec, i: int):
    """The ``i``-th member (1-based) of ``P``, ``P_eta`` or ``twoP_eta``, or :data:`EXHAUSTED`."""
    if spec.family not in ("P", "P_eta", "twoP_eta"):
        raise ArgumentError("enum_program_set handles P, P_eta and twoP_eta")
    ps = _program_set(spec.len_cap, spec.s, spec.m, spec.step_cap)
    eta_state = None if spec.eta is None else _eta_matrix(spec.eta)
    return _nth(ps.members(spec.family, eta_state), i)


def enum_sigma(spec: ProgramSetSpec, i: int):
    """The ``i``-th program discovered for Sigma, or :data:`EXHAUSTED`."""
    if spec.family not in ("Sigma", "SigmaStar") or spec.ell is None:
        raise ArgumentError("enum_sigma needs a Sigma spec with ell")
    ps = _program_set(spec.len_cap, spec.s, spec.m, spec.step_cap)
    return _nth(ps.sigma_list(spec.ell), i)


def enum_sigma_star(spec: ProgramSetSpec, i: int):
    """The ``i``-th program kept by the greedy Sigma* filter, or :data:`EXHAUSTED`."""
    if spec.family not in ("Sigma", "SigmaStar") or spec.ell is None:
        raise ArgumentError("enum_sigma_star needs a Sigma spec with ell")
    ps = _program_set(spec.len_cap, spec.s, spec.m, spec.step_cap)
    return _nth(ps.sigma_star_list(spec.ell), i)


def brute_force_members(spec: ProgramSetSpec) -> set[str]:
    """Membership by direct scan, without the dovetailed ordering.

    Re-runs every program from scratch; meant as a test oracle.
    """
    rows = []
    for bits, prog in programs_up_to(spec.len_cap):
        outs = []
        for x in range(1, spec.s + 1):
            e = eta(prog, x, spec.m, spec.step_cap)
            if e is UNDEFINED:
                outs = None
                break
            outs.append(e)
        if outs is not None:
            rows.append((bits, outs))

    def close(outs, ref, factor):
        return all(qmath.trace_distance(outs[x - 1], ref) <= factor / x for x in range(1, spec.s + 1))

    if spec.family == "P":
        return {b for b, _ in rows}
    if spec.family in ("P_eta", "twoP_eta"):
        ref = _eta_matrix(spec.eta)
        f = 1.0 if spec.family == "P_eta" else 2.0
        return {b for b, o in rows if close(o, ref, f)}
    sigma = {
        b
        for b, o in rows
        if sum(close(o2, o[spec.s - 1], 2.0) for _, o2 in rows) > 2**spec.ell
    }
    if spec.family == "Sigma":
        return sigma
    raise ArgumentError("brute force does not define SigmaStar membership (order dependent)")
