"""Classical codecs: tuples, naturals, rationals and matrix text.

Binary strings are ordinary Python ``str`` objects over ``"0"`` and ``"1"``.

Tuple packing writes every part but the last as ``1^|x| 0 x`` and appends the
last part verbatim, so ``encode_tuple(["10", "0", "11"]) == "1101010011"``.

Naturals use the bijective dyadic order ``0 <-> "", 1 <-> "0", 2 <-> "1",
3 <-> "00", ...`` so every bit string names exactly one natural.

Matrix text
-----------
A density matrix is written row-major, one row per line, entries separated by
a single space and each entry as ``re,im``. Each real number is rounded to
``p`` decimal places, trailing zeros and a trailing point are stripped, and
negative zero is written ``0``. Rows are joined with ``\\n`` and there is no
trailing newline. The zero-qubit state is the single entry ``1,0``. Example
for ``I/2``::

    0.5,0 0,0
    0,0 0.5,0
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from fractions import Fraction

import numpy as np

from .errors import ArgumentError, DecodeError, FormatError

__all__ = [
    "is_bits",
    "encode_tuple",
    "decode_tuple",
    "tuple_length",
    "encode_natural",
    "decode_natural",
    "encode_rational",
    "decode_rational",
    "constant_real_program",
    "divergent_real_program",
    "sqrt2_real_program",
    "ClassicalStateRepresentation",
    "encode_matrix",
    "decode_matrix",
    "text_to_bits",
    "bits_to_text",
    "ComputableRealProgram",
    "Timeout",
    "computable_real_eval",
]


def is_bits(s: str) -> bool:
    return all(c in "01" for c in s)


def _check_bits(s: str) -> None:
    if not is_bits(s):
        raise ArgumentError(f"not a binary string: {s!r}")


# ---------------------------------------------------------------------------
# tuples


def encode_tuple(parts) -> str:
    """Pack a non-empty sequence of bit strings into one self-delimiting string."""
    parts = list(parts)
    if not parts:
        raise ArgumentError("encode_tuple needs at least one part")
    out = []
    for x in parts[:-1]:
        _check_bits(x)
        out.append("1" * len(x) + "0" + x)
    _check_bits(parts[-1])
    out.append(parts[-1])
    return "".join(out)


def tuple_length(parts) -> int:
    """Length of ``encode_tuple(parts)`` without building it."""
    parts = list(parts)
    return sum(2 * len(x) + 1 for x in parts[:-1]) + len(parts[-1])


def decode_tuple(s: str, arity: int) -> list[str]:
    """Inverse of :func:`encode_tuple` for a known number of parts.

    Raises:
        DecodeError: if a length prefix is not terminated by ``0`` or the
            declared part runs past the end of the string.
    """
    if arity < 1:
        raise ArgumentError("arity must be at least 1")
    if not is_bits(s):
        raise DecodeError(f"not a binary string: {s!r}")
    parts, pos = [], 0
    for _ in range(arity - 1):
        run = 0
        while pos < len(s) and s[pos] == "1":
            run += 1
            pos += 1
        if pos >= len(s):
            raise DecodeError("length prefix not terminated by 0")
        pos += 1  # the separating 0
        if pos + run > len(s):
            raise DecodeError("part runs past the end of the string")
        parts.append(s[pos : pos + run])
        pos += run
    parts.append(s[pos:])
    return parts


# ---------------------------------------------------------------------------
# naturals and rationals


def encode_natural(n: int) -> str:
    """Dyadic encoding: ``n`` maps to the binary form of ``n + 1`` without its leading 1."""
    if n < 0:
        raise ArgumentError("naturals are non-negative")
    return bin(n + 1)[3:]


def decode_natural(s: str) -> int:
    if not is_bits(s):
        raise DecodeError(f"not a binary string: {s!r}")
    return int("1" + s, 2) - 1


def encode_rational(q) -> str:
    """Sign bit, numerator and denominator packed with :func:`encode_tuple`."""
    q = Fraction(q)
    sign = "1" if q < 0 else "0"
    return encode_tuple([sign, encode_natural(abs(q.numerator)), encode_natural(q.denominator)])


def decode_rational(s: str) -> Fraction:
    """Parse the output of :func:`encode_rational`.

    Raises:
        FormatError: on a malformed tuple, a sign other than one bit, or a
            zero denominator.
    """
    try:
        sign, num, den = decode_tuple(s, 3)
    except DecodeError as exc:
        raise FormatError(f"not a rational encoding: {exc}") from exc
    if sign not in ("0", "1"):
        raise FormatError("sign must be a single bit")
    d = decode_natural(den)
    if d == 0:
        raise FormatError("zero denominator")
    q = Fraction(decode_natural(num), d)
    return -q if sign == "1" else q


# ---------------------------------------------------------------------------
# matrix text


@dataclass(frozen=True)
class ClassicalStateRepresentation:
    """Canonical text form of a density matrix at fixed decimal precision."""

    qubits: int
    text: str
    precision: int

    def to_matrix(self) -> np.ndarray:
        return decode_matrix(self.text, self.precision)


def _fmt_real(x: float, p: int) -> str:
    d = Decimal(repr(float(x))).quantize(Decimal(1).scaleb(-p), rounding=ROUND_HALF_EVEN)
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    if s in ("-0", ""):
        s = "0"
    return s


def encode_matrix(rho, precision_digits: int = 6) -> ClassicalStateRepresentation:
    """Canonical text of ``rho`` with ``precision_digits`` decimal places."""
    if precision_digits < 1:
        raise ArgumentError("precision must be at least 1 digit")
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ArgumentError("matrix must be square")
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if (1 << n) != dim:
        raise ArgumentError("dimension is not a power of two")
    lines = []
    for row in rho:
        lines.append(
            " ".join(f"{_fmt_real(z.real, precision_digits)},{_fmt_real(z.imag, precision_digits)}" for z in row)
        )
    return ClassicalStateRepresentation(n, "\n".join(lines), precision_digits)


def decode_matrix(text: str, precision_digits: int = 6) -> np.ndarray:
    """Parse matrix text and check Hermiticity and unit trace.

    Both checks use a tolerance of ``dim * 10**(1 - p)`` to absorb rounding.

    Raises:
        DecodeError: on syntax errors, a non power-of-two shape, or failed
            validation.
    """
    if precision_digits < 1:
        raise ArgumentError("precision must be at least 1 digit")
    rows = []
    try:
        for line in text.split("\n"):
            row = []
            for entry in line.split(" "):
                re, im = entry.split(",")
                row.append(complex(float(Decimal(re)), float(Decimal(im))))
            rows.append(row)
    except (ValueError, InvalidOperation) as exc:
        raise DecodeError(f"malformed matrix text: {exc}") from exc
    dim = len(rows)
    if any(len(r) != dim for r in rows):
        raise DecodeError("matrix text is not square")
    if (1 << (dim.bit_length() - 1)) != dim:
        raise DecodeError("dimension is not a power of two")
    rho = np.array(rows, dtype=complex)
    tol = dim * 10.0 ** (1 - precision_digits)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise DecodeError("matrix text is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise DecodeError("matrix text does not have unit trace")
    return rho


def text_to_bits(text: str) -> str:
    """Eight bits per byte of the UTF-8 text, most significant bit first."""
    return "".join(format(b, "08b") for b in text.encode("utf-8"))


def bits_to_text(bits: str) -> str:
    if len(bits) % 8 or not is_bits(bits):
        raise DecodeError("bit string is not a whole number of bytes")
    data = bytes(int(bits[i : i + 8], 2) for i in range(0, len(bits), 8))
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(str(exc)) from exc


# ---------------------------------------------------------------------------
# computable reals


@dataclass(frozen=True)
class ComputableRealProgram:
    """A reference-machine program that, on input ``encode_natural(k)``,
    writes ``encode_rational(q_k)`` with ``|r - q_k| <= 1/k``."""

    program: str


class Timeout:
    """Marker returned when a program does not halt within its step cap."""

    def __init__(self, steps: int):
        self.steps = steps

    def __repr__(self):
        return f"Timeout(steps={self.steps})"

    def __eq__(self, other):
        return isinstance(other, Timeout) and other.steps == self.steps


def computable_real_eval(r: ComputableRealProgram, k: int, step_cap: int):
    """Run ``r`` on ``k`` and return its rational output, or :class:`Timeout`.

    Raises:
        FormatError: if the program halts with output that is not a rational.
    """
    from .machine import parse_program, universal_run  # deferred: machine imports this module

    if k < 1:
        raise ArgumentError("k must be at least 1")
    prog = parse_program(r.program)
    res = universal_run(prog, encode_natural(k), None, step_cap, forced=False)
    if not res.halted:
        return Timeout(res.steps_used)
    return decode_rational(res.classical_output)


# ---------------------------------------------------------------------------
# example real-number programs


class _Asm:
    """Tiny macro assembler emitting DCQ-ASM text with generated labels."""

    def __init__(self):
        self.lines: list[str] = []
        self._n = 0

    def label(self, stem: str = "L") -> str:
        self._n += 1
        return f"{stem}{self._n}"

    def emit(self, *ops: str) -> None:
        self.lines.extend(ops)

    def place(self, name: str) -> None:
        self.lines.append(f"{name}:")

    def walk(self, move: str, over: tuple[str, ...]) -> None:
        """Move while the scanned symbol is in ``over``; stop on the first other."""
        top, step, out = self.label(), self.label(), self.label()
        self.place(top)
        for sym in over:
            self.emit(f"BR {sym} {step}")
        self.emit(f"JMP {out}")
        self.place(step)
        self.emit(move, f"JMP {top}")
        self.place(out)

    def text(self) -> str:
        return "\n".join(self.lines + ["HALT"]) + "\n"


def constant_real_program(q) -> ComputableRealProgram:
    """Program that ignores ``k`` and prints ``q``."""
    from .machine import assemble, serialize_program

    a = _Asm()
    a.emit("CR")
    for b in encode_rational(q):
        a.emit(f"W{b}", "CR")
    a.walk("WB\nCR", ("0", "1"))  # erase what is left of the input
    return ComputableRealProgram(serialize_program(assemble(a.text())))


def divergent_real_program() -> ComputableRealProgram:
    """Program that never halts."""
    from .machine import assemble, serialize_program

    return ComputableRealProgram(serialize_program(assemble("spin: JMP spin\nHALT\n")))


class _Fields:
    """Unary counters stored left of the anchor cell.

    The scratch region reads ``S 0 F1 0 F2 ... 0 Fn`` (runs of ``1`` separated
    by ``0``) and always ends at cell -1, so only its left end moves. Between
    macros the scratch field ``S`` is empty and the head rests on the
    region's leftmost cell. A unit is created or destroyed at the left end and
    carried to field ``f`` by sliding the separators in between.
    """

    def __init__(self, asm: _Asm, n: int):
        self.a, self.n = asm, n

    def home(self) -> None:
        self.a.walk("CL", ("0", "1"))
        self.a.emit("CR")

    def add(self, f: int, times: int = 1) -> None:
        a = self.a
        for _ in range(times):
            a.emit("CL", "W1", "W0", "CR", "W1")  # S gets a unit, slide sep 0|1 left
            for _ in range(f - 1):
                a.walk("CR", ("1",))  # to the next separator
                a.emit("W1", "CL", "W0", "CR")
            self.home()

    def take(self, f: int, if_empty: str, times: int = 1) -> None:
        """Remove one unit from field ``f``; jump to ``if_empty`` when it has none."""
        a = self.a
        for _ in range(times):
            for _ in range(f - 1):
                a.emit("CR")
                a.walk("CR", ("1",))
            a.emit("CR")
            have = a.label()
            a.emit(f"BR 1 {have}", "CL")  # back onto the separator, then home
            self.home()
            a.emit(f"JMP {if_empty}")
            a.place(have)
            a.emit("W0", "CL", "W1")  # slide sep f-1|f right
            for _ in range(f - 1):
                a.walk("CL", ("1",))
                a.emit("W1", "CR", "W0", "CL")
            a.emit("WB", "CR")  # drop the unit now held in S

    def move(self, src: int, dst: int, factor: int = 1) -> None:
        """Empty ``src`` into ``dst``, adding ``factor`` units per unit."""
        top, done = self.a.label(), self.a.label()
        self.a.place(top)
        self.take(src, done)
        self.add(dst, factor)
        self.a.emit(f"JMP {top}")
        self.a.place(done)

    def to_anchor(self) -> None:
        self.a.walk("CR", ("0", "1"))

    def from_anchor(self) -> None:
        self.a.emit("CL")
        self.home()

    def append_output(self, sym: str) -> None:
        """Write ``sym`` after the last non-blank cell right of the anchor."""
        a = self.a
        self.to_anchor()
        a.emit("CR")
        a.walk("CR", ("0", "1"))
        a.emit(f"W{sym}", "CL")
        a.walk("CL", ("0", "1"))
        self.from_anchor()


def sqrt2_real_program() -> ComputableRealProgram:
    """Program for the square root of two.

    On input ``k`` with ``L`` digits it fixes ``j = L + 2`` and computes the
    first ``j`` binary digits of sqrt(2) by bisection, keeping
    ``m = floor(sqrt(2) * 2**i)`` and ``r = 2 * 4**i - m**2`` in unary: the
    next digit is 1 exactly when ``m < r``. It prints
    ``(m - 1) / 2**j``, whose numerator in the dyadic code is the digit string
    and whose denominator is ``0**(j-1) 1``. The error is at most
    ``2 / 2**j <= 1 / k``.
    """
    from .machine import assemble, serialize_program

    a = _Asm()
    N, Z, M, R, A, B = 1, 2, 3, 4, 5, 6
    fl = _Fields(a, 6)
    # region "S0 N0 Z0 M1 0R1 0A 0B" = 00010100 at cells -8..-1
    for b in reversed("00010100"):
        a.emit("CL", f"W{b}")
    # count and erase the input into N
    top, done = a.label(), a.label()
    a.place(top)
    fl.to_anchor()
    a.emit("CR")
    have = a.label()
    a.emit(f"BR 0 {have}", f"BR 1 {have}")
    a.emit("CL")
    fl.from_anchor()
    a.emit(f"JMP {done}")
    a.place(have)
    a.walk("CR", ("0", "1"))
    a.emit("CL", "WB", "CL")
    a.walk("CL", ("0", "1"))
    fl.from_anchor()
    fl.add(N)
    a.emit(f"JMP {top}")
    a.place(done)
    fl.add(N, 2)
    # prefix of the rational code: sign "0" then 1^j 0
    for sym in "100":
        fl.append_output(sym)
    top, done = a.label(), a.label()
    a.place(top)
    fl.take(N, done)
    fl.add(Z)
    fl.append_output("1")
    a.emit(f"JMP {top}")
    a.place(done)
    fl.append_output("0")
    fl.move(Z, N)
    # one digit per pass
    loop, finish = a.label("digit"), a.label("finish")
    a.place(loop)
    fl.take(N, finish)
    fl.add(Z)
    m_out, r_out, one, zero, store = (a.label() for _ in range(5))
    cmp_top = a.label()
    a.place(cmp_top)
    fl.take(M, m_out)
    fl.add(A)
    fl.take(R, r_out)
    fl.add(B)
    a.emit(f"JMP {cmp_top}")
    a.place(m_out)  # m units all taken; digit is 1 iff R still has some
    fl.take(R, r_out)
    fl.add(R)
    fl.move(A, M)
    fl.move(B, R)
    a.emit(f"JMP {one}")
    a.place(r_out)
    fl.move(A, M)
    fl.move(B, R)
    a.place(zero)
    fl.append_output("0")
    fl.move(M, A, 2)
    fl.move(R, B, 4)
    a.emit(f"JMP {store}")
    a.place(one)
    fl.append_output("1")
    fl.move(R, B, 4)
    sub_top, sub_done = a.label(), a.label()
    a.place(sub_top)
    fl.take(M, sub_done)
    fl.add(A, 2)
    fl.take(B, sub_done, 4)
    a.emit(f"JMP {sub_top}")
    a.place(sub_done)
    fl.add(A)
    fl.take(B, store)
    a.place(store)  # store the new m and r
    fl.move(A, M)
    fl.move(B, R)
    a.emit(f"JMP {loop}")
    # denominator 2**j = 0^(j-1) 1
    a.place(finish)
    fl.move(Z, N)
    top, done = a.label(), a.label()
    a.place(top)
    fl.take(N, done)
    fl.append_output("0")
    a.emit(f"JMP {top}")
    a.place(done)
    fl.to_anchor()
    a.emit("CR")
    a.walk("CR", ("0", "1"))
    a.emit("CL", "W1")
    return ComputableRealProgram(serialize_program(assemble(a.text())))
