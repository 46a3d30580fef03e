"""Command-line front end.

Exit codes: 0 pass, 1 usage or config error, 2 detection or verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import adversary as adv
from .carriers import SchemeSpec, build_carrier, encode_message, hadamard_round, round_trip
from .modular_codes import CodeSpec, encode_codeword, is_prime, power_sum_table, verify_code_relations
from .protocol_engine import ConfigError, load_config, run_session
from .qudit_state import apply_fourier, fidelity, omega_powers

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(header: list[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _scheme_from_args(args) -> SchemeSpec:
    data = {"variant": args.variant, "parity": args.parity}
    if args.n is not None:
        data["n"] = args.n
    if args.k is not None:
        data["k"] = args.k
    if args.variant == "NN" and args.n is None:
        data["n"] = 3
    if args.variant == "KN" and args.k is None:
        data["k"] = 2
    try:
        return SchemeSpec.from_json(data)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- run-session -----------------------------------------------------------------

def cmd_run_session(args) -> int:
    if not args.config:
        raise UsageError("run-session needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.rng_seed = args.seed
    transcript = run_session(cfg)
    text = transcript.to_csv() if args.format == "csv" else transcript.to_jsonl()
    _emit(text, args.out)
    s = transcript.summary
    print(f"{s['mismatches']}/{s['stray_rounds']} stray mismatches, "
          f"payload errors {s['payload_errors']}, "
          f"carrier fidelity {s['final_carrier_fidelity']:.12f}", file=sys.stderr)
    return EXIT_FAIL if s["mismatches"] else EXIT_OK


# -- verify-code ------------------------------------------------------------------

def _code_residuals(spec: CodeSpec) -> tuple[float, float]:
    """Max |<s|t> - δ| over codewords and max ||F^n|s> - target|| for the Fourier closure."""
    n = spec.n
    words = [encode_codeword(spec, s, backend="dense").state for s in range(n)]
    vecs = [w.vector().ravel() for w in words]
    ortho = max(abs(np.vdot(vecs[a], vecs[b]) - (a == b)) for a in range(n) for b in range(n))
    roots = omega_powers(n)
    closure = 0.0
    for s, w in enumerate(words):
        out = w
        for j in range(n):
            out = apply_fourier(out, j)
        target = sum(roots[(-s * x) % n] * vecs[x] for x in range(n)) / math.sqrt(n)
        closure = max(closure, float(np.linalg.norm(out.vector().ravel() - target)))
    return float(ortho), closure


def cmd_verify_code(args) -> int:
    if args.k is None or args.n is None:
        raise UsageError("verify-code needs --k and --n")
    if not is_prime(args.n) or args.n < 3:
        raise UsageError("n must be prime")
    try:
        spec = CodeSpec(args.k, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = verify_code_relations(spec)
    ortho, closure = _code_residuals(spec)
    ok = report.passed and ortho < 1e-10 and closure < 1e-10
    if args.format == "csv":
        text = _csv(["i", "j", "value", "expected", "passed"],
                    [(r.i, r.j, r.value, r.expected, int(r.passed)) for r in report.relations])
    else:
        data = report.to_json()
        data.update(orthonormality_residual=ortho, fourier_closure_residual=closure, passed=ok)
        text = _dumps(data)
    _emit(text, args.out)
    print(_gram_table(report.gram), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def _gram_table(gram: list[list[int]]) -> str:
    rows = ["e_i.e_j mod n"]
    rows += ["  " + " ".join(f"{v:3d}" for v in row) for row in gram]
    return "\n".join(rows)


# -- verify-carrier -----------------------------------------------------------------

DEFAULT_SCHEMES = (
    SchemeSpec.kd(), SchemeSpec.two_two("odd"), SchemeSpec.two_two("even"),
    SchemeSpec.nn(3, "odd"), SchemeSpec.nn(3, "even"), SchemeSpec.kn(2, 3), SchemeSpec.kn(3, 5),
)


def _check_scheme(scheme: SchemeSpec) -> dict:
    carrier = build_carrier(scheme)
    after = hadamard_round(carrier)
    h_fid = fidelity(after.state, build_carrier(after.scheme).state)
    worst = 1.0
    clean = True
    for s in range(scheme.d):
        _, c, msg = round_trip(scheme, s)
        worst = min(worst, fidelity(msg, encode_message(scheme, None, s)))
        clean = clean and fidelity(c.state, carrier.state) >= 1 - 1e-12
    return {
        "scheme": scheme.to_json(),
        "hadamard_fidelity": round(h_fid, 12),
        "hadamard_target_parity": after.scheme.parity if scheme.has_parity else None,
        "round_trip_min_fidelity": round(worst, 12),
        "carrier_clean": clean,
        "passed": h_fid >= 1 - 1e-10 and worst >= 1 - 1e-12 and clean,
    }


def cmd_verify_carrier(args) -> int:
    if args.config:
        schemes = [load_config(args.config).scheme]
    elif args.variant:
        schemes = [_scheme_from_args(args)]
    else:
        schemes = list(DEFAULT_SCHEMES)
    results = _pmap(_check_scheme, schemes, args.jobs)
    if args.format == "csv":
        text = _csv(["variant", "k", "n", "parity", "hadamard_fidelity",
                     "round_trip_min_fidelity", "carrier_clean", "passed"],
                    [(r["scheme"]["variant"], r["scheme"]["k"] or "", r["scheme"]["n"],
                      r["scheme"]["parity"], r["hadamard_fidelity"], r["round_trip_min_fidelity"],
                      int(r["carrier_clean"]), int(r["passed"])) for r in results])
    else:
        text = _dumps({"results": results, "passed": all(r["passed"] for r in results)})
    _emit(text, args.out)
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_FAIL


# -- attack ---------------------------------------------------------------------------

def _mc_job(job: tuple) -> tuple[float, int]:
    scheme_json, model_json, rounds, seed = job
    return adv.monte_carlo_detection(SchemeSpec.from_json(scheme_json),
                                     adv.AttackModel.from_json(model_json), rounds, seed)


def cmd_attack(args) -> int:
    params = {}
    if args.config:
        cfg = load_config(args.config)
        scheme = cfg.scheme
        if cfg.adversary is None:
            raise UsageError("config has no adversary section")
        kind, params = cfg.adversary.kind, dict(cfg.adversary.params)
    else:
        if not args.kind:
            raise UsageError("attack needs a kind or --config")
        kind = args.kind
        scheme = SchemeSpec.kn(2, 3) if kind == "insider_b3" else _scheme_from_args(args)
    seed = args.seed if args.seed is not None else 0
    symbols = args.symbols if args.symbols is not None else params.get("symbols")
    if symbols is None:
        symbols = list(range(scheme.d))
    if any(not 0 <= s < scheme.d for s in symbols):
        raise UsageError(f"symbols must lie in Z_{scheme.d}")
    ancillas = args.ancillas or params.get("ancillas", "orthogonal")

    if kind == "passive_intercept":
        report = adv.passive_intercept(scheme, symbols)
        failed = report.notes["leakage"] >= 1e-10
    elif kind == "entangle_difference":
        if len(symbols) < 2:
            raise UsageError("entangle_difference needs at least two symbols")
        report = adv.entangle_difference_attack(scheme, symbols, args.hadamard, rng=seed)
        failed = False
    elif kind == "contaminate_carrier":
        try:
            xis = adv.parse_ancillas(ancillas, scheme.d)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad ancillas: {exc}") from exc
        report = adv.contamination_detection(scheme, xis)
        failed = False
    elif kind == "insider_b3":
        report = adv.insider_b3_attack()
        failed = max(report.distances) >= 1e-10
    else:
        raise UsageError(f"unknown attack kind {kind!r}")

    if args.monte_carlo:
        if kind not in ("entangle_difference", "contaminate_carrier"):
            raise UsageError("--monte-carlo applies to entangle_difference and contaminate_carrier")
        model = adv.AttackModel(kind, {"ancillas": ancillas} if kind == "contaminate_carrier" else {})
        jobs = [(scheme.to_json(), model.to_json(), args.monte_carlo, seed + i)
                for i in range(args.sweeps)]
        runs = _pmap(_mc_job, jobs, args.jobs)
        checks = sum(c for _, c in runs)
        hits = sum(round(f * c) for f, c in runs)
        report.notes["monte_carlo"] = {
            "rounds_per_session": args.monte_carlo, "sessions": args.sweeps,
            "stray_checks": checks, "mismatch_frequency": hits / checks if checks else 0.0,
            "per_session": [f for f, _ in runs],
        }

    data = report.to_json()
    if args.format == "csv":
        rows = [("difference", i, v) for i, v in enumerate(data["differences"])]
        rows += [("distance", i, v) for i, v in enumerate(data["distances"])]
        rows += [("detection_probability", 0, data["detection_probability"])]
        rows += [("entanglement", i, v) for i, v in enumerate(data["entanglement_measures"])]
        text = _csv(["quantity", "index", "value"], rows)
    else:
        text = _dumps(data)
    _emit(text, args.out)
    return EXIT_FAIL if failed else EXIT_OK


# -- power-sums --------------------------------------------------------------------------

def cmd_power_sums(args) -> int:
    if not 3 <= args.p_max <= 101:
        raise UsageError("--p-max must lie in [3, 101]")
    primes = [p for p in range(3, args.p_max + 1) if is_prime(p)]
    tables = {p: power_sum_table(p) for p in primes}
    ok = all(r["ok"] for rows in tables.values() for r in rows)
    if args.format == "csv":
        text = _csv(["p", "k", "direct", "recursive", "expected", "diagonal", "ok"],
                    [(r["p"], r["k"], r["direct"], "" if r["recursive"] is None else r["recursive"],
                      r["expected"], int(r["k"] == p - 1), int(r["ok"]))
                     for p, rows in tables.items() for r in rows])
    else:
        text = _dumps({
            "rows": [{"p": p, "direct": [r["direct"] for r in rows],
                      "recursive": [r["recursive"] for r in rows],
                      "ok": all(r["ok"] for r in rows)} for p, rows in tables.items()],
            "passed": ok,
        })
    _emit(text, args.out)
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="session or scenario file (TOML or JSON)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, help="overrides the seed in --config")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    scheme = argparse.ArgumentParser(add_help=False)
    scheme.add_argument("--variant", choices=("KD", "TwoTwo", "NN", "KN"))
    scheme.add_argument("--k", type=int)
    scheme.add_argument("--n", type=int)
    scheme.add_argument("--parity", choices=("odd", "even"), default="odd")

    p = argparse.ArgumentParser(prog="qcarrier", description="Quantum carrier protocol simulator")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run-session", parents=[common], help="simulate a session from a config")
    vc = sub.add_parser("verify-code", parents=[common], help="check the (k,n) code relations")
    vc.add_argument("--k", type=int)
    vc.add_argument("--n", type=int)
    sub.add_parser("verify-carrier", parents=[common, scheme],
                   help="Hadamard invariance and upload/download round trips")
    at = sub.add_parser("attack", parents=[common, scheme], help="run an attack experiment")
    at.add_argument("kind", nargs="?", choices=adv.ATTACK_KINDS)
    at.add_argument("--symbols", type=int, nargs="+")
    at.add_argument("--hadamard", action="store_true", help="Hadamard rounds between uploads")
    at.add_argument("--ancillas", choices=("orthogonal", "equal"))
    at.add_argument("--monte-carlo", type=int, metavar="ROUNDS",
                    help="also run seeded sessions of this many rounds")
    at.add_argument("--sweeps", type=int, default=1, help="number of Monte Carlo sessions")
    ps = sub.add_parser("power-sums", parents=[common], help="S_k(p) table for primes <= p_max")
    ps.add_argument("--p-max", type=int, default=13)
    return p


COMMANDS = {
    "run-session": cmd_run_session,
    "verify-code": cmd_verify_code,
    "verify-carrier": cmd_verify_carrier,
    "attack": cmd_attack,
    "power-sums": cmd_power_sums,
}


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("QCARRIER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
