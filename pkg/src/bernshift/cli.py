"""Command-line front end.

Exit status: 0 success (inconclusive verdicts included), 1 invalid
configuration, 2 an operation rejected its input, 3 self-test failure.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .catalog import builtin_names, describe, resolve
from .classify import Budgets, dissipativity_certificate, hopf_horizon, hopf_partial_sums, krieger_type_report, lag_plan, prefix_measure
from .cocycle import DEFAULT_TOL, hellinger_curve, kakutani_check
from .errors import BernShiftError, CertificateNotFound, InvalidRule, ToleranceUnreachable
from .examples import (
    PRINTED_PEAK,
    dissipative_growth_report,
    factorization_batch,
    peak_report,
    symbolic_lower_bound_terms,
    symbolic_schedule,
    terms_grow,
    weird_conservative_prefix,
    weird_conservativity_audit,
)
from .maharam import height_traces, recurrence_stats, traces_to_csv
from .measure import acip_report, block_rng, measure_from_dict, measure_to_dict, nonsingularity_report, sample_matrix
from .odometer import odometer_property_check, rigidity_batch, transport_check
from .reporting import dumps, envelope, rows_csv, validate, write_report, write_text
from .selftest import CHECKS, run_selftest
from .tail import essential_value_certificate

ENV_OUT = "BERNSHIFT_OUT"
DEFAULT_OUT = "bernshift-out"


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _pos_int(text):
    try:
        v = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _nonneg_int(text):
    v = _pos_int(text) if text.strip() not in ("0",) else 0
    return v


def _pos_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help=f"output directory (default: ${ENV_OUT} or ./{DEFAULT_OUT})")
    common.add_argument("--seed", type=_nonneg_int, help="root seed; randomized commands draw and print one if omitted")
    common.add_argument("--workers", type=_pos_int, default=1, help="threads for Monte Carlo blocks")

    p = _Parser(prog="bernshift", description="Numerical laboratory for half-stationary Bernoulli shifts.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_measure(sp, required=True):
        sp.add_argument("--measure", required=required,
                        help="builtin name (optionally 'builtin:' prefixed) or a measure JSON file")

    sp = sub.add_parser("measure", parents=[common], help="build, inspect or validate a measure")
    with_measure(sp, required=False)
    sp.add_argument("--validate", metavar="FILE", help="validate a measure JSON file and exit")
    sp.add_argument("--list", action="store_true", help="list builtin measures")
    sp.add_argument("--kmax", type=_pos_int, default=1 << 16)
    sp.add_argument("--show", type=_pos_int, default=64, help="rows in bias.csv")

    sp = sub.add_parser("diagnose", parents=[common], help="Hellinger curve, Kakutani check, classification")
    with_measure(sp)
    sp.add_argument("--nmax", type=_pos_int, default=100)
    sp.add_argument("--tol", type=_pos_float, default=DEFAULT_TOL)
    sp.add_argument("--delta", type=_pos_float, default=0.1)
    sp.add_argument("--kakutani-max", type=_pos_int, default=200, help="largest lag for the Kakutani check")
    sp.add_argument("--classify", action="store_true", help="also write classification.json")
    sp.add_argument("--kmax", type=_pos_int, default=1 << 20)
    sp.add_argument("--hopf-samples", type=_pos_int, default=200)
    sp.add_argument("--hopf-N", type=_pos_int, default=1000)
    sp.add_argument("--scan-max", type=_pos_int, default=100_000)

    sp = sub.add_parser("simulate", help="Monte Carlo simulations")
    sim = sp.add_subparsers(dest="what", required=True, parser_class=_Parser)
    h = sim.add_parser("hopf", parents=[common], help="Hopf partial sums S_N = sum T^{n'}")
    with_measure(h)
    h.add_argument("--samples", type=_pos_int, default=200)
    h.add_argument("--N", type=_pos_int, default=1000)
    h.add_argument("--tol", type=_pos_float, default=DEFAULT_TOL)
    mh = sim.add_parser("maharam", parents=[common], help="skew-product orbits and recurrence")
    with_measure(mh)
    mh.add_argument("--samples", type=_pos_int, default=1000)
    mh.add_argument("--steps", type=_pos_int, default=1000)
    mh.add_argument("--targets", type=_float_list, default=[0.0, 0.5, 1.0])
    mh.add_argument("--eps", type=_pos_float, default=0.05)
    mh.add_argument("--trace-samples", type=_pos_int, default=20, help="orbits written to maharam.csv")
    mh.add_argument("--tol", type=_pos_float, default=DEFAULT_TOL)

    sp = sub.add_parser("certify", parents=[common], help="essential-value certificate")
    with_measure(sp)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--eps", type=_pos_float, required=True)
    sp.add_argument("--cylinder", default="01")
    sp.add_argument("--scan-max", type=_pos_int, default=100_000)
    sp.add_argument("--mc-samples", type=_nonneg_int, default=0, help="Monte Carlo cross-check samples (0 = off)")

    sp = sub.add_parser("odometer", help="odometer checks")
    odo = sp.add_subparsers(dest="what", required=True, parser_class=_Parser)
    op = odo.add_parser("property", parents=[common], help="orbit of tau hits every N-prefix once")
    op.add_argument("--N", type=_pos_int, default=16)
    orr = odo.add_parser("rigidity", parents=[common], help="derivative of tau^(2^n) along rigidity times")
    with_measure(orr)
    orr.add_argument("--nmax", type=_pos_int, default=20)
    orr.add_argument("--samples", type=_pos_int, default=1000)
    ot = odo.add_parser("transport", parents=[common], help="brute-force mass transport under tau")
    with_measure(ot)
    ot.add_argument("--N", type=_pos_int, default=10)

    sp = sub.add_parser("examples", help="the worked constructions and their audits")
    ex = sp.add_subparsers(dest="what", required=True, parser_class=_Parser)
    ed = ex.add_parser("dissipative", parents=[common], help="growth report for the 4/n rule and its sqrt variant")
    ed.add_argument("--variant", choices=["printed", "sqrt", "both"], default="both")
    ed.add_argument("--nmax", type=_pos_int, default=10_000)
    ew = ex.add_parser("weird", parents=[common], help="scheduled conservative construction")
    ew.add_argument("--tmax", type=_pos_int, default=1)
    ew.add_argument("--audit", action="store_true")
    ew.add_argument("--peak", type=_pos_float, default=PRINTED_PEAK, help="lambda at block centres (3 matches the stated 3/4)")
    ew.add_argument("--samples", type=_pos_int, default=2000, help="probe samples per k")
    ew.add_argument("--audit-samples", type=_pos_int, default=1000)
    ew.add_argument("--factorization-points", type=_pos_int, default=1000)
    ew.add_argument("--max-index", type=_pos_int, default=1 << 20)
    ew.add_argument("--max-stage", type=_pos_int, default=3)
    ew.add_argument("--symbolic", action="store_true", help="add the uncapped integer schedule (t <= 3)")

    sp = sub.add_parser("selftest", parents=[common], help="run the invariant suite")
    sp.add_argument("--only", nargs="*", choices=sorted(CHECKS), help="run a subset of checks")
    return p


# -- helpers -------------------------------------------------------------------------


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {d}: {exc}") from None
    if not os.access(d, os.W_OK):
        raise ConfigError(f"output directory {d} is not writable")
    return d


def _seed(args, randomized: bool = True) -> int:
    if args.seed is not None:
        return args.seed
    if not randomized:
        return 0
    s = secrets.randbelow(2**31)
    print(f"seed: {s}", file=sys.stderr)
    return s


def _measure(args):
    try:
        return resolve(args.measure)
    except InvalidRule as exc:
        raise ConfigError(str(exc)) from None


class _Run:
    """Shared context for one command: where to write and what to embed."""

    def __init__(self, args, argv, seed, budgets=None, measure=None):
        self.dir = _out_dir(args)
        self.argv = list(argv)
        self.seed = seed
        self.budgets = budgets or {}
        self.measure = measure
        self.written: list[Path] = []

    def report(self, name: str, kind: str, result) -> None:
        doc = envelope(kind, result, command=self.argv, seed=self.seed, budgets=self.budgets, measure=self.measure)
        self.written.append(write_report(self.dir / name, doc))

    def text(self, name: str, content: str) -> None:
        self.written.append(write_text(self.dir / name, content))

    def done(self) -> int:
        for p in self.written:
            print(p)
        return 0


# -- commands ------------------------------------------------------------------------


def cmd_measure(args, argv) -> int:
    if args.list:
        for name in builtin_names():
            print(f"{name:22s} {describe(name)}")
        return 0
    if args.validate:
        try:
            doc = json.loads(Path(args.validate).read_text())
            validate(doc, "measure")
            measure_from_dict(doc)
        except (OSError, json.JSONDecodeError, jsonschema.ValidationError, InvalidRule) as exc:
            msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
            raise ConfigError(f"invalid measure file {args.validate}: {msg}") from None
        print(f"{args.validate}: valid")
        return 0
    if not args.measure:
        raise ConfigError("measure: give --measure, --validate or --list")
    m = _measure(args)
    run = _Run(args, argv, _seed(args, randomized=False), {"kmax": args.kmax, "show": args.show}, m)
    doc = measure_to_dict(m)
    validate(doc, "measure")
    run.text("measure.json", dumps(doc))
    if m.is_binary:
        ks = np.arange(1, args.show + 1)
        run.text("bias.csv", rows_csv(["k", "a_k"], zip(ks.tolist(), m.bias(ks).tolist())))
    ns = nonsingularity_report(m, args.kmax)
    ac = acip_report(m, args.kmax)
    run.report("measure_report.json", "measure", {"nonsingular": ns.to_dict(), "acip": ac.to_dict()})
    return run.done()


def cmd_diagnose(args, argv) -> int:
    m = _measure(args)
    budgets = {"nmax": args.nmax, "tol": args.tol, "delta": args.delta, "kakutani_max": args.kakutani_max}
    if args.classify:
        budgets |= {"kmax": args.kmax, "hopf_samples": args.hopf_samples, "hopf_N": args.hopf_N,
                    "scan_max": args.scan_max}
    run = _Run(args, argv, _seed(args, randomized=args.classify), budgets, m)
    if not m.is_binary:
        raise ConfigError("diagnose needs a binary measure")
    mode, lags, cap = lag_plan(m, args.nmax, args.tol, 1 << 22)
    curve = hellinger_curve(m, lags, args.tol, cap, strict=False)
    run.text("hellinger.csv", curve.to_csv())
    kak = kakutani_check(m, [n for n in lags if n <= args.kakutani_max], args.delta, args.tol, cap)
    run.text("kakutani.csv", rows_csv(
        ["n", "d", "neg_log_rho", "lower_ok", "upper_ratio", "upper_ok"],
        [(r.n, r.d, r.neg_log_rho, r.lower_ok, r.upper_ratio, r.upper_ok) for r in kak]))
    result = {
        "lag_mode": mode,
        "truncation_cap": cap,
        "kakutani": {
            "lags": len(kak),
            "lower_ok_all": all(r.lower_ok for r in kak),
            "upper_checked": sum(r.upper_ok is not None for r in kak),
            "upper_ok_all": all(r.upper_ok is not False for r in kak),
            "upper_constant": kak[0].upper_constant if kak else None,
        },
    }
    if args.nmax >= 10:
        result["dissipativity"] = dissipativity_certificate(m, args.nmax, args.tol).to_dict()
    run.report("diagnose.json", "diagnose", result)
    if args.classify:
        b = Budgets(kmax=args.kmax, nmax=max(args.nmax, 10), hopf_samples=args.hopf_samples, hopf_N=args.hopf_N,
                    scan_max=args.scan_max, tol=args.tol, seed=run.seed)
        run.report("classification.json", "classification", krieger_type_report(m, b).to_dict())
    return run.done()


def cmd_simulate(args, argv) -> int:
    m = _measure(args)
    seed = _seed(args)
    if args.what == "hopf":
        run = _Run(args, argv, seed, {"samples": args.samples, "N": args.N, "tol": args.tol}, m)
        target, note = m, None
        try:
            hopf_horizon(m, args.N, args.tol)
        except ToleranceUnreachable:
            target = prefix_measure(m, args.N + 64)
            note = "tail not certifiable per sample: sums use the first N + 64 biases followed by the past bias"
        tr = hopf_partial_sums(target, args.samples, args.N, seed, tol=args.tol, workers=args.workers)
        run.text("hopf.csv", tr.to_csv())
        summary = tr.summary() | {"plateau": tr.plateau(), "prefix_fallback": note}
        run.report("hopf.json", "hopf", summary)
        return run.done()
    budgets = {"samples": args.samples, "steps": args.steps, "targets": args.targets, "eps": args.eps,
               "trace_samples": args.trace_samples, "tol": args.tol}
    run = _Run(args, argv, seed, budgets, m)
    rec = recurrence_stats(m, args.targets, args.eps, args.samples, args.steps, seed, args.tol, workers=args.workers)
    traces = height_traces(m, min(args.trace_samples, args.samples), args.steps, seed, args.tol)
    run.text("maharam.csv", traces_to_csv(traces))
    run.report("maharam.json", "maharam", rec.to_dict())
    return run.done()


def cmd_certify(args, argv) -> int:
    m = _measure(args)
    if not m.is_binary:
        raise ConfigError("certify needs a binary measure")
    seed = _seed(args, randomized=args.mc_samples > 0)
    budgets = {"scan_max": args.scan_max, "mc_samples": args.mc_samples}
    run = _Run(args, argv, seed, budgets, m)
    try:
        cert = essential_value_certificate(m, args.p, args.eps, args.cylinder, args.scan_max, args.mc_samples, seed)
        result = cert.to_dict() | {"not_found": False}
    except CertificateNotFound as exc:
        result = {"not_found": True, "p": args.p, "epsilon": args.eps, "scanned_to": exc.scanned_to,
                  "message": str(exc)}
    run.report("certificate.json", "certificate", result)
    return run.done()


def cmd_odometer(args, argv) -> int:
    if args.what == "property":
        if args.N > 20:
            raise ConfigError("--N must be <= 20")
        run = _Run(args, argv, _seed(args, randomized=False), {"N": args.N})
        res = {str(N): odometer_property_check(N) for N in range(1, args.N + 1)}
        run.report("odometer.json", "odometer-property", {"per_N": res, "ok": all(res.values())})
        return run.done()
    m = _measure(args)
    if args.what == "transport":
        run = _Run(args, argv, _seed(args, randomized=False), {"N": args.N}, m)
        run.report("odometer.json", "odometer-transport", transport_check(m, args.N))
        return run.done()
    if args.nmax > 24:
        raise ConfigError("--nmax must be <= 24")
    seed = _seed(args)
    run = _Run(args, argv, seed, {"nmax": args.nmax, "samples": args.samples}, m)
    rows = []
    for n in range(1, args.nmax + 1):
        X = sample_matrix(m, n + 64, args.samples, block_rng(seed, n))
        b = rigidity_batch(m, X, n)
        keep = ~b.overflow
        rows.append({"n": n, "method": b.method, "used": int(keep.sum()), "overflow": int(b.overflow.sum()),
                     "max_deviation": b.max_deviation, "coordinates_fixed": bool(b.fix_ok[keep].all())})
    ok = all(r["max_deviation"] <= 1e-10 and r["coordinates_fixed"] for r in rows)
    run.text("rigidity.csv", rows_csv(["n", "method", "used", "overflow", "max_deviation", "coordinates_fixed"],
                                      [list(r.values()) for r in rows]))
    run.report("odometer.json", "odometer-rigidity", {"per_n": rows, "ok": ok})
    return run.done()


def cmd_examples(args, argv) -> int:
    if args.what == "dissipative":
        run = _Run(args, argv, _seed(args, randomized=False), {"nmax": args.nmax, "variant": args.variant})
        variants = ["printed", "sqrt"] if args.variant == "both" else [args.variant]
        reports = {v: dissipative_growth_report(v, args.nmax) for v in variants}
        run.text("taylor.csv", rows_csv(["k", "value", "claimed_first_order", "second_order"],
                                        [(r["k"], r["value"], r["claimed_first_order"], r["second_order"])
                                         for r in next(iter(reports.values()))["taylor"]]))
        run.report("dissipative.json", "dissipative-example", {"variants": reports})
        return run.done()
    seed = _seed(args)
    budgets = {"tmax": args.tmax, "peak": args.peak, "samples": args.samples, "max_index": args.max_index,
               "max_stage": args.max_stage}
    if args.audit:
        budgets |= {"audit_samples": args.audit_samples, "factorization_points": args.factorization_points}
    prefix = weird_conservative_prefix(args.tmax, args.max_index, args.max_stage, args.peak, args.samples, seed)
    run = _Run(args, argv, seed, budgets, prefix.measure)
    run.report("schedule.json", "schedule", prefix.schedule.to_dict())
    run.text("bias.csv", prefix.bias_csv())
    if args.audit:
        audit = weird_conservativity_audit(prefix, args.audit_samples, seed)
        fac = factorization_batch(prefix, args.factorization_points, seed)
        result = audit.to_dict() | {"factorization": fac, "peak": peak_report(args.peak)}
        if args.symbolic:
            stages = symbolic_schedule(3, args.peak, args.samples, seed)
            rows = symbolic_lower_bound_terms(stages)
            result["symbolic"] = {
                "stages": [s.__dict__ for s in stages],
                "lower_bound_terms": rows,
                "terms_grow": terms_grow(rows),
            }
        run.text("audit.csv", audit.rates_csv())
        run.report("audit.json", "weird-audit", result)
    return run.done()


def cmd_selftest(args, argv) -> int:
    seed = _seed(args)
    run = _Run(args, argv, seed, {"checks": sorted(args.only) if args.only else sorted(CHECKS)})
    results = run_selftest(seed, args.only)
    failed = [r["check"] for r in results if not r["ok"]]
    run.text("selftest.csv", rows_csv(["check", "ok"], [(r["check"], r["ok"]) for r in results]))
    run.report("selftest.json", "selftest", {"checks": results, "failed": failed, "ok": not failed})
    for r in results:
        print(f"{'PASS' if r['ok'] else 'FAIL'} {r['check']}", file=sys.stderr)
    run.done()
    return 3 if failed else 0


COMMANDS = {
    "measure": cmd_measure,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "odometer": cmd_odometer,
    "examples": cmd_examples,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BernShiftError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
