"""Command line entry point ``dcqtk``.

Exit codes: 0 when every check passed, 1 when a check failed, 2 on usage or
input errors. Reports are JSON (or CSV for sweeps) with a fixed field order
and a metadata block holding the tool version, the configuration, its hash
and the seed, so identical invocations produce identical bytes.

Configuration is read from ``--config``, else from the path in the
``DCQTK_CONFIG`` environment variable, else defaults apply. The file is JSON::

    {"qubit_cap": 12,
     "tolerances": {"hermiticity_tol": 1e-9, "psd_tol": 1e-9,
                    "trace_tol": 1e-9, "metric_tol": 1e-7},
     "codec_precision": 12,
     "budget": {"max_program_len": 16, "step_cap": 4096, "resolution": 8,
                "scan_len": null},
     "seed": 0}

States are given as a JSON file in the ``{"qubits": n, "rows": ...}`` format
or by name: ``basis:BITS``, ``plus:N``, ``mixed:N``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, qmath
from .cloning import (
    ReconstructionParams,
    antifidelity_set_probe,
    lemma1_sweep,
    lemma3_sweep,
    no_cloning_gap,
    reconstruct_from_cloner,
)
from .complexity import (
    SearchBudget,
    chain_gap,
    information_profile,
    k_bounded,
    k_conditional_bounded,
    k_direct_bounded,
    k_representation_bounded,
    representation_bits,
)
from .encoding import encode_matrix
from .enumerate import (
    EXHAUSTED,
    ProgramSetSpec,
    enum_program_set,
    enum_sigma,
    enum_sigma_star,
    nearest_directly_computable,
    pi1,
)
from .errors import DcqError
from .machine import as_program, universal_run

__all__ = ["WorkbenchConfig", "load_config", "main", "dispatch", "emit_report"]


@dataclass(frozen=True)
class WorkbenchConfig:
    """Settings shared by every subcommand."""

    qubit_cap: int = 12
    tolerances: qmath.ToleranceConfig = field(default_factory=qmath.ToleranceConfig)
    codec_precision: int = 12
    budget: SearchBudget = field(default_factory=SearchBudget)
    seed: int = 0

    def __post_init__(self):
        if self.qubit_cap < 1 or self.codec_precision < 1:
            raise DcqError("qubit_cap and codec_precision must be positive")
        if not 0 <= self.seed < 2**64:
            raise DcqError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "qubit_cap": self.qubit_cap,
            "tolerances": dataclasses.asdict(self.tolerances),
            "codec_precision": self.codec_precision,
            "budget": {
                "max_program_len": self.budget.max_program_len,
                "step_cap": self.budget.step_cap,
                "resolution": self.budget.resolution,
                "scan_len": self.budget.scan_len,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkbenchConfig":
        base = cls()
        return cls(
            qubit_cap=d.get("qubit_cap", base.qubit_cap),
            tolerances=qmath.ToleranceConfig(**d.get("tolerances", {})),
            codec_precision=d.get("codec_precision", base.codec_precision),
            budget=SearchBudget(**d.get("budget", {})),
            seed=d.get("seed", base.seed),
        )

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def load_config(path: str | None) -> WorkbenchConfig:
    path = path or os.environ.get("DCQTK_CONFIG")
    if not path:
        return WorkbenchConfig()
    with open(path, encoding="utf-8") as fh:
        return WorkbenchConfig.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# report emission


def _plain(x):
    """Convert report values to JSON-ready objects with a stable layout."""
    if hasattr(x, "to_dict"):
        return _plain(x.to_dict())
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return json.loads(qmath.state_to_json(x))
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return x


def _meta(cfg: WorkbenchConfig) -> dict:
    return {"tool": "dcqtk", "version": __version__, "config_hash": cfg.digest(), "seed": cfg.seed, "config": cfg.to_dict()}


def emit_report(result, fmt: str, path: str | None, cfg: WorkbenchConfig, columns=None) -> str:
    """Serialize a report as JSON or CSV and write it to ``path`` (or stdout).

    CSV output starts with ``#`` comment lines holding the metadata; the
    rows of ``result["rows"]`` follow with ``columns`` as header. JSONL
    output is one metadata line followed by one line per row.
    """
    if fmt == "json":
        text = json.dumps({"meta": _meta(cfg), "result": _plain(result)}, indent=2) + "\n"
    elif fmt == "jsonl":
        lines = [json.dumps({"meta": _meta(cfg)})]
        lines += [json.dumps(_plain(row)) for row in result["rows"]]
        text = "\n".join(lines) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        meta = _meta(cfg)
        for key in ("tool", "version", "config_hash", "seed"):
            buf.write(f"# {key}: {meta[key]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in result["rows"]:
            w.writerow([_csv_cell(row[c]) for c in columns])
        text = buf.getvalue()
    else:
        raise DcqError(f"unknown format {fmt!r}")
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def _csv_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


# ---------------------------------------------------------------------------
# argument helpers


def _read_state(spec: str) -> np.ndarray:
    if spec.startswith("basis:"):
        return qmath.basis_density(spec[6:])
    if spec.startswith("plus:"):
        return qmath.plus_density(int(spec[5:]))
    if spec.startswith("mixed:"):
        return qmath.maximally_mixed(int(spec[6:]))
    with open(spec, encoding="utf-8") as fh:
        return qmath.state_from_json(fh.read())


def _read_program(spec: str):
    if os.path.exists(spec):
        with open(spec, encoding="utf-8") as fh:
            spec = fh.read().strip()
    return as_program(spec)


def _budget(args, cfg: WorkbenchConfig) -> SearchBudget:
    b = cfg.budget
    return SearchBudget(
        max_program_len=b.max_program_len if args.max_len is None else args.max_len,
        step_cap=b.step_cap if args.steps is None else args.steps,
        resolution=b.resolution if args.resolution is None else args.resolution,
        scan_len=b.scan_len if args.scan_len is None else args.scan_len,
    )


def _add_budget(p):
    p.add_argument("--max-len", type=int, default=None, help="longest witness in bits")
    p.add_argument("--steps", type=int, default=None, help="step cap per run")
    p.add_argument("--resolution", type=int, default=None, help="largest k checked")
    p.add_argument("--scan-len", type=int, default=None, help="exhaustive search length")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file (default: $DCQTK_CONFIG)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument(
        "--format", choices=("json", "csv", "jsonl"), default=None, help="default: jsonl for *.jsonl, else json"
    )
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    p = argparse.ArgumentParser(prog="dcqtk", description="Deterministic-control quantum machine workbench.")
    p.add_argument("--version", action="version", version=f"dcqtk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run a DCQ-ASM program")
    r.add_argument("--program", required=True, help="file or inline text/bits")
    r.add_argument("--input", default="", help="classical input bits")
    r.add_argument("--state", "--qinput", dest="state", default=None, help="quantum input state")
    r.add_argument("--steps", "--max-steps", dest="max_steps", type=int, default=10_000)
    r.add_argument("--forced", action="store_true", help="read outputs after --steps even without halting")

    e = sub.add_parser("enum", parents=[common], help="state enumeration")
    e.add_argument("what", choices=("pi1", "nearest", "sets"))
    e.add_argument("--s", type=int, default=None, help="pi1 index, or the input count for sets")
    e.add_argument("--from", dest="lo", type=int, default=None, help="first pi1 index of a range")
    e.add_argument("--to", dest="hi", type=int, default=None, help="last pi1 index of a range")
    e.add_argument("--mode", choices=("quantum", "classical"), default="quantum")
    e.add_argument("--state", "--target", dest="state", default=None, help="target for nearest")
    e.add_argument("--k", type=int, default=1)
    e.add_argument("--family", choices=("P", "P_eta", "twoP_eta", "Sigma", "SigmaStar"), default="P")
    e.add_argument("--eta", default=None, help="reference prefix state for P_eta and twoP_eta")
    e.add_argument("--m", type=int, default=1, help="prefix qubits")
    e.add_argument("--len-cap", type=int, default=12)
    e.add_argument("--step-cap", type=int, default=512)
    e.add_argument("--ell", type=int, default=None)

    n = sub.add_parser("nearest", parents=[common], help="nearest directly computable state")
    n.add_argument("--state", "--target", dest="state", required=True)
    n.add_argument("--k", type=int, default=1)

    k = sub.add_parser("k", parents=[common], help="complexity certificate")
    k.add_argument("--state", required=True)
    k.add_argument(
        "--quantity", choices=("approx", "direct", "representation", "conditional"), default="approx"
    )
    k.add_argument("--given-text", default=None, help="condition on the matrix text of this state")
    k.add_argument("--given-copy", default=None, help="condition on a copy of this state")
    _add_budget(k)

    ip = sub.add_parser("info-profile", parents=[common], help="mutual-information profile")
    ip.add_argument("--state", required=True)
    ip.add_argument("--split", type=int, required=True)
    _add_budget(ip)

    cg = sub.add_parser("chain-gap", parents=[common], help="chain-rule gap")
    cg.add_argument("--state", required=True)
    cg.add_argument("--split", type=int, required=True)
    _add_budget(cg)

    ng = sub.add_parser("no-cloning-gap", parents=[common], help="echo, copy and duplication certificates")
    ng.add_argument("--state", required=True)
    _add_budget(ng)

    v = sub.add_parser("verify", parents=[common], help="randomized lemma checks")
    v.add_argument("what", choices=("lemma1", "lemma3", "delta0", "antifidelity"))
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--qubits", type=int, default=1)

    c = sub.add_parser("clone-reconstruct", parents=[common], help="rebuild a state from a cloner program")
    c.add_argument("--program", required=True)
    c.add_argument("--n", type=int, default=1)
    c.add_argument("--m", type=int, default=0)
    c.add_argument("--k", type=int, default=2)
    c.add_argument("--override-delta0", type=float, default=None)
    c.add_argument("--override-k0", type=int, default=None)
    c.add_argument("--override-kout", type=int, default=None)
    c.add_argument("--ceiling", type=int, default=3 * 10**10)
    return p


# ---------------------------------------------------------------------------
# subcommands (each returns (report, passed, columns))


def _cmd_run(args, cfg):
    prog = _read_program(args.program)
    rho = None if args.state is None else _read_state(args.state)
    res = universal_run(prog, args.input, rho, args.max_steps, forced=args.forced)
    report = {
        "halted": res.halted,
        "steps": res.steps_used,
        "classical_output": res.classical_output,
        "output_qubits": res.output_qubits,
        "quantum_output": res.quantum_output,
    }
    return report, True, None


def _pi1_row(s, mode, cfg):
    if mode == "classical":
        rep = pi1(s, "classical", cfg.codec_precision)
        return {"s": s, "mode": "classical", "text": rep.text, "qubits": rep.qubits}
    return {"s": s, "mode": "quantum", "state": pi1(s)}


def _cmd_enum(args, cfg):
    if args.what == "pi1":
        if args.lo is not None or args.hi is not None:
            if args.lo is None or args.hi is None or not 0 <= args.lo <= args.hi:
                raise DcqError("enum pi1 needs 0 <= --from <= --to")
            rows = [_pi1_row(s, args.mode, cfg) for s in range(args.lo, args.hi + 1)]
            return {"rows": rows}, True, None
        if args.s is None:
            raise DcqError("enum pi1 needs --s or --from/--to")
        return _pi1_row(args.s, args.mode, cfg), True, None
    if args.what == "sets":
        return _sets(args, cfg)
    if args.state is None:
        raise DcqError("enum nearest needs --state")
    return _nearest(args.state, args.k, cfg)


def _sets(args, cfg):
    if args.s is None:
        raise DcqError("enum sets needs --s")
    eta = None if args.eta is None else _read_state(args.eta)
    spec = ProgramSetSpec(args.s, args.family, eta, args.m, args.len_cap, args.ell, args.step_cap)
    if args.family in ("P", "P_eta", "twoP_eta"):
        fn = enum_program_set
    else:
        fn = enum_sigma if args.family == "Sigma" else enum_sigma_star
    rows, i = [], 1
    while True:
        bits = fn(spec, i)
        if bits is EXHAUSTED:
            break
        rows.append({"index": i, "program": bits, "length": len(bits), "family": args.family, "s": args.s})
        i += 1
    return {"rows": rows}, True, ["index", "program", "length", "family", "s"]


def _nearest(state, k, cfg):
    target = _read_state(state)
    r = nearest_directly_computable(k, encode_matrix(target, cfg.codec_precision), precision_digits=cfg.codec_precision)
    ok = r.exhausted or (r.distance is not None and r.distance <= 1 / (2 * k) + cfg.tolerances.metric_tol)
    report = {"k": k, "s": r.s, "program": r.program, "distance": r.distance, "exhausted": r.exhausted, "state": r.state}
    return report, ok, None


def _cmd_nearest(args, cfg):
    return _nearest(args.state, args.k, cfg)


def _cmd_k(args, cfg):
    rho = _read_state(args.state)
    b = _budget(args, cfg)
    p, th = cfg.codec_precision, args.threads
    if args.quantity == "direct":
        cert = k_direct_bounded(rho, b, workers=th)
    elif args.quantity == "representation":
        cert = k_representation_bounded(rho, b, precision=p, workers=th)
    elif args.quantity == "conditional":
        x = "" if args.given_text is None else representation_bits(_read_state(args.given_text), p)
        sigma = None if args.given_copy is None else _read_state(args.given_copy)
        cert = k_conditional_bounded(rho, x, sigma, b, precision=p, workers=th)
    else:
        cert = k_bounded(rho, b, workers=th)
    return cert, cert.replay(), None


def _cmd_info(args, cfg):
    prof = information_profile(_read_state(args.state), args.split, _budget(args, cfg), cfg.codec_precision, args.threads)
    ok = not prof.complete or prof.c_corr == prof.i1 - prof.iQ
    ok = ok and all(c.replay() for c in prof.certificates.values())
    return prof, ok, None


def _cmd_chain(args, cfg):
    g = chain_gap(_read_state(args.state), args.split, _budget(args, cfg), cfg.codec_precision, args.threads)
    return g, all(c.replay() for c in g.certificates.values()), None


def _cmd_no_cloning(args, cfg):
    rep = no_cloning_gap(_read_state(args.state), _budget(args, cfg), cfg.codec_precision)
    return rep, rep["passed"], None


def _cmd_verify(args, cfg):
    tol = cfg.tolerances.metric_tol
    if args.what in ("lemma1", "lemma3"):
        sweep = lemma1_sweep if args.what == "lemma1" else lemma3_sweep
        rep = sweep(args.trials, cfg.seed, args.qubits, tol)
        return {"summary": rep.summary(), "rows": rep.rows}, rep.passed, list(rep.columns)
    if args.what == "delta0":
        rows = []
        for n_dim in range(1, 5):
            for variant in ("pure", "mixed"):
                v = qmath.delta0(n_dim, variant)
                exact = str(qmath.delta0(n_dim, variant, exact=True)) if n_dim == 1 else None
                rows.append({"N": n_dim, "variant": variant, "delta0": float(v), "digits": str(v)[:20], "exact": exact})
        ok = rows[0]["exact"] == "1/25" and rows[1]["exact"] == "1/625"
        return {"rows": rows}, ok, ["N", "variant", "delta0", "digits", "exact"]
    rng = np.random.default_rng(cfg.seed)
    d = 1 << args.qubits
    rows = []
    for trial in range(args.trials):
        states = [qmath.random_density(args.qubits, rng) for _ in range(d + 1)]
        r = antifidelity_set_probe(states)
        rows.append({"trial": trial, "size": r["size"], "max_F": r["max_F"], "delta0": r["delta0"], "pass": r["passed"]})
    return {"rows": rows}, all(r["pass"] for r in rows), ["trial", "size", "max_F", "delta0", "pass"]


def _cmd_clone(args, cfg):
    params = ReconstructionParams(
        _read_program(args.program),
        args.n,
        args.m,
        args.override_delta0,
        args.override_k0,
        args.override_kout,
        args.ceiling,
        precision=cfg.codec_precision,
    )
    res = reconstruct_from_cloner(params, args.k)
    report = {
        "status": res.status,
        "phase": res.phase,
        "s_out": res.s_out,
        "state": res.state,
        "list_size": len(res.list_states),
        "log": res.log,
    }
    return report, True, None


_COMMANDS = {
    "run": _cmd_run,
    "enum": _cmd_enum,
    "nearest": _cmd_nearest,
    "k": _cmd_k,
    "info-profile": _cmd_info,
    "chain-gap": _cmd_chain,
    "no-cloning-gap": _cmd_no_cloning,
    "verify": _cmd_verify,
    "clone-reconstruct": _cmd_clone,
}


def dispatch(argv) -> int:
    """Run one subcommand and return its exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.threads < 1:
            raise DcqError("--threads must be positive")
        old_cap = qmath.set_qubit_cap(cfg.qubit_cap)
        try:
            report, ok, columns = _COMMANDS[args.command](args, cfg)
        finally:
            qmath.set_qubit_cap(old_cap)
        fmt = args.format or ("jsonl" if args.out and args.out.endswith(".jsonl") else "json")
        if fmt == "csv" and columns is None:
            raise DcqError(f"{args.command} has no tabular output; use --format json")
        if fmt == "jsonl" and not (isinstance(report, dict) and "rows" in report):
            raise DcqError(f"{args.command} has no row output; use --format json")
        emit_report(report, fmt, args.out, cfg, columns)
    except (DcqError, ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"dcqtk: error: {exc}\n")
        return 2
    return 0 if ok else 1


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
