"""Cloning bounds: program channels, copying-error lemmas and reconstruction.

Numeric verifiers return their full transcript as plain dictionaries so
callers (and the command line) can serialize every number they checked.
Randomized sweeps draw trial ``i`` from ``numpy.random.default_rng([seed, i])``
so each trial can be replayed on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import qmath
from .complexity import (
    C_COPY,
    C_ECHO,
    ECHO_WITNESS,
    INFINITY,
    SearchBudget,
    k_bounded,
    k_conditional_bounded,
    representation_bits,
    routine,
)
from .encoding import decode_matrix, encode_matrix, encode_natural
from .enumerate import first_index, pi1
from .errors import ArgumentError, BudgetExhausted, CapacityError, ValidationError
from .machine import as_program, universal_run

__all__ = [
    "ProgramChannel",
    "channel_from_program",
    "program_kraus",
    "verify_lemma1",
    "verify_lemma3",
    "noisy_cloner",
    "lemma1_sweep",
    "lemma3_sweep",
    "antifidelity_set_probe",
    "ReconstructionParams",
    "ReconstructionResult",
    "reconstruct_from_cloner",
    "literal_constants",
    "no_cloning_gap",
    "SweepReport",
    "BASIS_CLONER_ASM",
    "CONSTANT_ZERO_ASM",
]

# copies quantum cell 1 onto cell 2 and declares both as output
BASIS_CLONER_ASM = "QR\nCNOT\nOUT\nHALT"
# parks the input in the anchor cell and outputs two fresh |0> cells
CONSTANT_ZERO_ASM = "SWAP\nQR\nQR\nOUT\nHALT"

# copying errors below this are indistinguishable from rounding noise
CE_RESOLUTION = 1e-7


# ---------------------------------------------------------------------------
# program channels


@dataclass(frozen=True)
class ProgramChannel:
    """The map ``sigma -> quantum output of t on (k; sigma)``."""

    t: object
    k: int
    step_cap: int
    in_qubits: int

    def __post_init__(self):
        if self.k < 0 or self.step_cap < 1 or self.in_qubits < 0:
            raise ArgumentError("k, step_cap and in_qubits must be non-negative (step_cap positive)")
        object.__setattr__(self, "t", as_program(self.t))

    def __call__(self, rho):
        return channel_from_program(self, rho)


def channel_from_program(pc: ProgramChannel, rho) -> np.ndarray:
    """Quantum output of ``pc.t`` on ``(encode_natural(k); rho)``.

    Raises:
        ArgumentError: if ``rho`` does not have ``pc.in_qubits`` qubits.
        BudgetExhausted: if the program does not halt within ``step_cap``.
    """
    rho = np.asarray(rho, dtype=complex)
    if qmath.num_qubits(rho) != pc.in_qubits:
        raise ArgumentError(f"channel expects {pc.in_qubits} input qubits")
    res = universal_run(pc.t, encode_natural(pc.k), rho, pc.step_cap, forced=False)
    if not res.halted:
        raise BudgetExhausted("program did not halt within step_cap", res.steps_used)
    return res.quantum_output


def _probe_states(d: int):
    """Density matrices spanning all ``d x d`` operators, keyed by what they build."""
    e = np.eye(d, dtype=complex)
    out = {}
    for i in range(d):
        out[("diag", i)] = np.outer(e[i], e[i])
    for i, j in combinations(range(d), 2):
        plus = (e[i] + e[j]) / math.sqrt(2)
        yplus = (e[i] + 1j * e[j]) / math.sqrt(2)
        out[("x", i, j)] = np.outer(plus, plus.conj())
        out[("y", i, j)] = np.outer(yplus, yplus.conj())
    return out


def program_kraus(pc: ProgramChannel, tol: float = 1e-7) -> qmath.KrausChannel:
    """Kraus form of a program channel reconstructed by probing.

    The program is run on a spanning set of input states; the outputs fix
    the Choi matrix by linearity. Trace preservation is checked on every
    probe.

    Raises:
        ValidationError: if an output has the wrong trace or the outputs
            differ in size.
    """
    d = 1 << pc.in_qubits
    probes = _probe_states(d)
    outs = {key: channel_from_program(pc, rho) for key, rho in probes.items()}
    shapes = {o.shape for o in outs.values()}
    if len(shapes) != 1:
        raise ValidationError(f"program output size depends on the input: {sorted(shapes)}")
    for key, o in outs.items():
        if abs(np.trace(o) - 1) > tol:
            raise ValidationError(f"program channel is not trace preserving on probe {key}")
    dout = shapes.pop()[0]
    images = {}
    for i in range(d):
        images[(i, i)] = outs[("diag", i)]
    for i, j in combinations(range(d), 2):
        eij = outs[("x", i, j)] + 1j * outs[("y", i, j)] - 0.5 * (1 + 1j) * (images[(i, i)] + images[(j, j)])
        images[(i, j)] = eij
        images[(j, i)] = eij.conj().T
    choi = np.zeros((d * dout, d * dout), dtype=complex)
    for (i, j), img in images.items():
        choi[i * dout : (i + 1) * dout, j * dout : (j + 1) * dout] = img
    vals, vecs = np.linalg.eigh((choi + choi.conj().T) / 2)
    ops = []
    for lam, v in zip(vals, vecs.T):
        if lam > tol:
            ops.append(math.sqrt(lam) * v.reshape(d, dout).T)
    return qmath.KrausChannel(pc.in_qubits, dout.bit_length() - 1, ops)


# ---------------------------------------------------------------------------
# lemma verifiers


def verify_lemma1(t: qmath.KrausChannel, rho1, rho2, tol: float = 1e-7) -> dict:
    """Check the fidelity dichotomy for two states that ``t`` nearly copies."""
    ce1, ce2 = qmath.copying_error(t, rho1), qmath.copying_error(t, rho2)
    eps = ce1 + ce2
    f = qmath.fidelity(rho1, rho2)
    report = {"ce1": ce1, "ce2": ce2, "epsilon": eps, "F": f}
    if eps > 0.25:
        report.update(applicable=False, lower=None, upper=None, branch="skipped", passed=True)
        return report
    r = math.sqrt(0.25 - eps)
    lower, upper = 0.5 - r, 0.5 + r
    if f <= lower + tol:
        branch = "lower"
    elif f >= upper - tol:
        branch = "upper"
    else:
        branch = "none"
    report.update(applicable=True, lower=lower, upper=upper, branch=branch, passed=branch != "none")
    return report


def verify_lemma3(t: qmath.KrausChannel, rho, rho_prime, k: int, tol: float = 1e-7) -> dict:
    """Check both distance implications for ``t`` at accuracy ``k``."""
    if k < 1:
        raise ArgumentError("k must be at least 1")
    rho, rho_prime = np.asarray(rho, dtype=complex), np.asarray(rho_prime, dtype=complex)
    d_copy = qmath.trace_distance(t(rho), qmath.tensor(rho, rho))
    d_states = qmath.trace_distance(rho, rho_prime)
    d_copy_prime = qmath.trace_distance(t(rho_prime), qmath.tensor(rho_prime, rho_prime))
    ce = qmath.copying_error(t, rho)
    part1_applies = d_copy <= 1.0 / k
    part1 = (not part1_applies) or ce <= math.sqrt(2.0 / k) + tol
    part2 = d_copy <= 3 * d_states + d_copy_prime + tol
    return {
        "k": k,
        "D_copy": d_copy,
        "D_states": d_states,
        "D_copy_prime": d_copy_prime,
        "CE": ce,
        "part1_applies": part1_applies,
        "part1": part1,
        "part2": part2,
        "passed": part1 and part2,
    }


def noisy_cloner(n: int, p: float, seed: int, base: str = "cnot") -> qmath.KrausChannel:
    """``(1 - p) * base + p * random channel`` as one Kraus family."""
    if not 0 <= p <= 1:
        raise ArgumentError("p must lie in [0, 1]")
    b = qmath.cnot_cloner(n) if base == "cnot" else qmath.basis_duplicator(n)
    noise = qmath.random_channel(n, 1, seed, out_qubits=2 * n)
    ops = [math.sqrt(1 - p) * k for k in b.kraus_ops] + [math.sqrt(p) * k for k in noise.kraus_ops]
    return qmath.KrausChannel(n, 2 * n, ops)


def _trial_state(rng, n):
    """Random state, or a random state mixed lightly into a basis state."""
    if rng.random() < 0.5:
        return qmath.random_density(n, rng)
    bits = "".join(rng.choice(["0", "1"], size=n))
    q = rng.uniform(0, 0.05) ** 2
    return (1 - q) * qmath.basis_density(bits) + q * qmath.random_density(n, rng)


@dataclass
class SweepReport:
    """Rows of a randomized sweep plus its aggregate verdict."""

    name: str
    seed: int
    rows: list = field(default_factory=list)
    columns: tuple = ()

    @property
    def violations(self) -> int:
        return sum(1 for r in self.rows if not r["pass"])

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "trials": len(self.rows),
            "violations": self.violations,
            "passed": self.passed,
        }


def lemma1_sweep(trials: int, seed: int, n: int = 1, tol: float = 1e-7) -> SweepReport:
    """Random near-cloners on random and near-basis state pairs."""
    rep = SweepReport("lemma1", seed, columns=("trial", "epsilon", "F", "branch", "pass"))
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        p = rng.uniform(0, 0.1) ** 2
        t = noisy_cloner(n, p, int(rng.integers(2**31)), "cnot" if rng.random() < 0.5 else "duplicator")
        rho1 = _trial_state(rng, n)
        rho2 = rho1 if rng.random() < 0.1 else _trial_state(rng, n)
        r = verify_lemma1(t, rho1, rho2, tol)
        rep.rows.append({"trial": i, "epsilon": r["epsilon"], "F": r["F"], "branch": r["branch"], "pass": r["passed"]})
    return rep


def lemma3_sweep(trials: int, seed: int, n: int = 1, tol: float = 1e-7) -> SweepReport:
    """Random channels (from near-cloners to fully random) and perturbed state pairs."""
    rep = SweepReport(
        "lemma3",
        seed,
        columns=("trial", "k", "D_copy", "D_states", "D_copy_prime", "CE", "part1_applies", "pass"),
    )
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        p = rng.uniform(0, 1) ** 3
        t = noisy_cloner(n, p, int(rng.integers(2**31)), "cnot" if rng.random() < 0.5 else "duplicator")
        rho = _trial_state(rng, n)
        r = rng.uniform(0, 1) ** 2
        rho_p = (1 - r) * rho + r * qmath.random_density(n, rng)
        k = int(rng.integers(1, 201))
        v = verify_lemma3(t, rho, rho_p, k, tol)
        rep.rows.append(
            {
                "trial": i,
                "k": k,
                "D_copy": v["D_copy"],
                "D_states": v["D_states"],
                "D_copy_prime": v["D_copy_prime"],
                "CE": v["CE"],
                "part1_applies": v["part1_applies"],
                "pass": v["passed"],
            }
        )
    return rep


def antifidelity_set_probe(states, variant: str = "mixed") -> dict:
    """Pairwise fidelities of a state family against the packing threshold.

    A family larger than the dimension ``N`` must contain a pair with
    fidelity above the threshold; ``passed`` is false only if that fails.
    """
    states = [np.asarray(s, dtype=complex) for s in states]
    if not states:
        raise ArgumentError("need at least one state")
    dims = {s.shape for s in states}
    if len(dims) != 1:
        raise ArgumentError("all states must have the same dimension")
    n_dim = states[0].shape[0]
    thr = float(qmath.delta0(n_dim, variant))
    fids = [
        {"i": i, "j": j, "F": qmath.fidelity(states[i], states[j])} for i, j in combinations(range(len(states)), 2)
    ]
    max_f = max((f["F"] for f in fids), default=0.0)
    certifies = all(f["F"] <= thr for f in fids)
    return {
        "N": n_dim,
        "size": len(states),
        "variant": variant,
        "delta0": thr,
        "max_F": max_f,
        "pairs": fids,
        "certifies_hypothesis": certifies,
        "passed": len(states) <= n_dim or not certifies,
    }


# ---------------------------------------------------------------------------
# reconstruction from a cloner


def literal_constants(n: int, k: int) -> dict:
    """Thresholds the reconstruction uses when nothing is overridden."""
    d0 = float(qmath.delta0(1 << n, "mixed"))
    eps0 = d0 * (1 - d0) / 4
    k0 = (4 / eps0) ** 2
    eps_out = min(d0 * (1 - d0), (1 / k**2) * (1 - 1 / k**2))
    k_out = math.inf if eps_out == 0 else (4 / eps_out) ** 2
    return {"delta0": d0, "eps0": eps0, "k0": k0, "eps_out": eps_out, "k_out": k_out}


@dataclass(frozen=True)
class ReconstructionParams:
    """Inputs of the reconstruction: cloner program ``t``, qubits ``n``, list index ``m``."""

    t: object
    n: int
    m: int
    delta0_override: float | None = None
    k0_override: int | None = None
    kout_override: int | None = None
    search_ceiling: int = 3 * 10**10
    step_cap: int = 4096
    precision: int = 12

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ArgumentError("n must be positive and m non-negative")
        for name in ("delta0_override", "k0_override", "kout_override"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ArgumentError(f"{name} must be positive")
        if self.search_ceiling < 0:
            raise ArgumentError("search_ceiling must be non-negative")
        if self.n > qmath.get_qubit_cap() // 2:
            raise CapacityError("the cloner output would exceed the qubit cap")
        object.__setattr__(self, "t", as_program(self.t))


@dataclass
class ReconstructionResult:
    """Outcome of :func:`reconstruct_from_cloner`.

    ``status`` is ``"ok"``, ``"exhausted"`` (with ``phase`` set) or
    ``"declined"`` when the thresholds are below numerical resolution.
    """

    status: str
    state: np.ndarray | None
    phase: str | None
    log: list
    list_states: list = field(default_factory=list)
    s_out: int | None = None

    @property
    def exhausted(self) -> bool:
        return self.status == "exhausted"


def reconstruct_from_cloner(params: ReconstructionParams, k: int) -> ReconstructionResult:
    """Rebuild a state from a program that duplicates it.

    List phase: scan the classical state stream for states the cloner copies
    well at ``k0`` and that have fidelity at most ``delta0`` with every state
    kept so far, until the list has ``m + 1`` entries; the last one is the
    reference. Output phase: scan again for a state copied well at ``k_out``
    with fidelity above ``16/sqrt(k0)`` to the reference and return the
    quantum state at that index. Threshold comparisons within ``1e-7`` are
    resolved toward rejection.
    """
    if k < 1:
        raise ArgumentError("k must be at least 1")
    n, p = params.n, params.precision
    lit = literal_constants(n, k)
    log = [{"event": "literal_constants", **lit}]
    d0 = params.delta0_override if params.delta0_override is not None else lit["delta0"]
    k0 = params.k0_override if params.k0_override is not None else lit["k0"]
    k_out = params.kout_override if params.kout_override is not None else lit["k_out"]
    thr0, thr_out = 2 / math.sqrt(k0), 2 / math.sqrt(k_out)
    log.append({"event": "thresholds", "delta0": d0, "k0": k0, "k_out": k_out, "ce0": thr0, "ce_out": thr_out})
    if min(thr0, thr_out) < CE_RESOLUTION or not math.isfinite(k_out):
        log.append({"event": "declined", "reason": "copying-error thresholds are below numerical resolution"})
        return ReconstructionResult("declined", None, None, log)

    tol = qmath.DEFAULT_TOL.metric_tol
    ch0 = ProgramChannel(params.t, int(k0), params.step_cap, n)
    ch_out = ProgramChannel(params.t, int(k_out), params.step_cap, n)
    ce_cache = {}

    def copy_error(ch, text, sigma):
        key = (ch.k, text)
        if key not in ce_cache:
            try:
                out = ch(sigma)
            except (BudgetExhausted, CapacityError):
                ce_cache[key] = math.inf
            else:
                if out.shape != (1 << 2 * n, 1 << 2 * n):
                    ce_cache[key] = math.inf
                else:
                    f = qmath.fidelity(qmath.tensor(sigma, sigma), out)
                    ce_cache[key] = math.sqrt(max(0.0, 1.0 - f))
        return ce_cache[key]

    def classical(q):
        text = encode_matrix(q, p).text
        return text, decode_matrix(text, p)

    lst = []

    def list_ok(text, sigma):
        if copy_error(ch0, text, sigma) > thr0 - tol:
            return False
        return all(qmath.fidelity(sigma, other) < d0 - tol for other in lst)

    def accept_list(q):
        return list_ok(*classical(q))

    s = 0
    while len(lst) <= params.m:
        hit = first_index(accept_list, n, s, params.search_ceiling)
        if hit is None:
            log.append({"event": "exhausted", "phase": "list", "size": len(lst)})
            return ReconstructionResult("exhausted", None, "list", log, lst)
        rep = pi1(hit, "classical", p)
        sigma = decode_matrix(rep.text, rep.precision)
        if not list_ok(rep.text, sigma):
            raise AssertionError(f"classical re-check failed at s={hit}")
        lst.append(sigma)
        log.append({"event": "list_add", "s": hit, "size": len(lst), "state": rep.text})
        s = hit + 1
    rho0 = lst[params.m]
    log.append({"event": "list_done", "size": len(lst), "within_dimension": len(lst) <= (1 << n)})

    f_min = 16 / math.sqrt(k0)

    def accept_out(q):
        text, sigma = classical(q)
        if copy_error(ch_out, text, sigma) > thr_out - tol:
            return False
        return qmath.fidelity(sigma, rho0) > f_min + tol

    hit = first_index(accept_out, n, 0, params.search_ceiling)
    if hit is None:
        log.append({"event": "exhausted", "phase": "output"})
        return ReconstructionResult("exhausted", None, "output", log, lst)
    state = pi1(hit, "quantum")
    log.append({"event": "output", "s": hit, "state": encode_matrix(state, p).text})
    return ReconstructionResult("ok", state, None, log, lst, hit)


# ---------------------------------------------------------------------------
# complexity gaps around cloning


def no_cloning_gap(rho, budget: SearchBudget, precision: int = 12) -> dict:
    """Echo, copy and duplication certificates for one state.

    Asserted: the echo witness bound, the double nearest-state bound, and
    ``K(rho x rho | blank; rho) <= K(rho) + C_ECHO`` when both are finite.
    Reported only: the reconstruction inequality with its ``2n + 2 log n``
    slack, since estimates only bound the left side from above.
    """
    rho = qmath.validate_density(rho)
    n = qmath.num_qubits(rho)
    pair = qmath.tensor(rho, rho)
    k_rho = k_bounded(rho, budget)
    k_echo = k_conditional_bounded(rho, "", rho, budget, [ECHO_WITNESS], precision)
    hints = [routine("ECHO_THEN", k_rho.witness)] if k_rho.finite else []
    k_dup = k_conditional_bounded(pair, "", rho, budget, hints, precision)
    k_copy = k_conditional_bounded(pair, representation_bits(rho, precision), None, budget, [routine("ALG2X2")], precision)
    duplication_bound = None
    if k_rho.finite and k_dup.finite:
        duplication_bound = k_dup.bound_bits <= k_rho.bound_bits + C_ECHO
    slack = 2 * n + (2 * math.log2(n) if n > 0 else 0.0)
    reconstruct_rhs = None if not k_dup.finite else k_dup.bound_bits + slack
    echo_ok = k_echo.finite and k_echo.bound_bits <= C_ECHO
    copy_ok = k_copy.finite and k_copy.bound_bits <= C_COPY
    return {
        "qubits": n,
        "K": k_rho,
        "K_echo": k_echo,
        "K_dup_given_copy": k_dup,
        "K_dup_given_text": k_copy,
        "c_echo": C_ECHO,
        "c_copy": C_COPY,
        "echo_ok": echo_ok,
        "copy_ok": copy_ok,
        "duplication_bound": duplication_bound,
        "reconstruction_lhs": k_rho.bound_bits if k_rho.finite else INFINITY,
        "reconstruction_rhs": reconstruct_rhs,
        "reconstruction_holds": None
        if reconstruct_rhs is None or not k_rho.finite
        else k_rho.bound_bits <= reconstruct_rhs,
        "passed": echo_ok and copy_ok and duplication_bound is not False,
    }
