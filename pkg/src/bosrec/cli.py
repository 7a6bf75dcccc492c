"""Command-line entry point: ``bosrec {evolve,compare,swap-demo,reconstruct} CONFIG``.

Exit codes: 0 ok, 1 bad input, 2 series truncation failure, 3 tolerance failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

from .lindblad import TraceDriftError
from .reconstruction import TruncationError
from .scenario import (
    ConfigError,
    Record,
    load_config_file,
    run_compare,
    run_evolve,
    run_reconstruct,
    run_reconstruct_two_mode,
    run_swap_demo,
)
from . import density as dm

EXIT_OK, EXIT_INPUT, EXIT_TRUNCATION, EXIT_TOLERANCE = 0, 1, 2, 3
CSV_HEADER = ("time", "observable", "index", "re", "im")


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _jsonable(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def records_to_csv(records: Sequence[Record]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(records, key=Record.sort_key):
        w.writerow([_num(r.time), r.observable, ";".join(map(str, r.index)),
                    _num(r.value.real), _num(r.value.imag)])
    return buf.getvalue()


def records_to_json(records: Sequence[Record]) -> list[dict]:
    return [
        {"time": r.time, "observable": r.observable, "index": list(r.index),
         "re": _jsonable(r.value.real), "im": _jsonable(r.value.imag)}
        for r in sorted(records, key=Record.sort_key)
    ]


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_evolve(args, cfg) -> int:
    snaps = run_evolve(cfg)
    records = [r for s in snaps for r in s.records]
    if args.format == "csv":
        _emit(records_to_csv(records), args.out)
    else:
        doc = {
            "times": [s.time for s in snaps],
            "states": [s.joint.to_dict() for s in snaps],
            "reduced": {
                "mode1": [s.mode1.to_dict() for s in snaps],
                "mode2": [s.mode2.to_dict() for s in snaps],
            },
            "observables": records_to_json(records),
        }
        _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return EXIT_OK


def _cmd_compare(args, cfg) -> int:
    report = run_compare(cfg, tolerance=args.tolerance)
    records = report.records()
    if args.format == "csv":
        _emit(records_to_csv(records), args.out)
    else:
        doc = {
            "times": [float(t) for t in report.times],
            "tolerance": report.tolerance,
            "max_deviation": [float(d) for d in report.max_deviation],
            "trace_deviation": [float(d) for d in report.trace_deviation],
            "passed": report.passed,
        }
        _emit(json.dumps(doc, indent=1) + "\n", args.out)
    worst = float(report.max_deviation.max())
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} max element deviation {worst:.3e} (tolerance {report.tolerance:.1e})", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def _cmd_swap(args, cfg) -> int:
    rep = run_swap_demo(cfg)
    records = rep.records()
    if args.format == "csv":
        _emit(records_to_csv(records), args.out)
    else:
        doc = {
            "times": [rep.time],
            "fidelity_mode2": rep.fidelity_mode2,
            "vacuum_deviation_mode1": rep.vacuum_deviation_mode1,
            "mode2": rep.mode2.to_dict(),
            "target": rep.target.to_dict(),
            "observables": records_to_json(records),
        }
        _emit(json.dumps(doc, indent=1) + "\n", args.out)
    if args.tolerance is not None and 1 - rep.fidelity_mode2 > args.tolerance:
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_reconstruct(args, cfg) -> int:
    if args.time is not None:
        if cfg.params is None:
            raise ConfigError("params", "--time needs model parameters")
        rho = run_reconstruct_two_mode(cfg, args.time)
        direct = None
    else:
        rho, direct = run_reconstruct(cfg)
    dev = None if direct is None else dm.max_deviation(rho, direct)
    if args.format == "csv":
        t = 0.0 if args.time is None else float(args.time)
        recs = []
        for n in rho.indices():
            for m in rho.indices():
                z = rho.entry(n, m)
                if abs(z) >= dm.ENTRY_THRESHOLD:
                    recs.append(Record(t, "element", tuple(n) + tuple(m), z))
        _emit(records_to_csv(recs), args.out)
    else:
        doc = rho.to_dict()
        doc["cancellation_flagged"] = [list(map(list, k)) for k in rho.diagnostics.get("cancellation_flagged", [])]
        if dev is not None:
            doc["max_deviation_from_direct"] = dev
        _emit(json.dumps(doc, indent=1) + "\n", args.out)
    if dev is not None:
        print(f"max deviation from direct construction {dev:.3e}", file=sys.stderr)
        if args.tolerance is not None and dev > args.tolerance:
            return EXIT_TOLERANCE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bosrec", description="Coupled damped oscillators from normally-ordered moments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, tol_help):
        p.add_argument("config", help="scenario file (dotted key = value lines)")
        p.add_argument("--out", help="write results here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--tolerance", type=float, default=None, help=tol_help)

    common(sub.add_parser("evolve", help="closed-form joint and reduced states over the time grid"),
           "unused; accepted for symmetry")
    common(sub.add_parser("compare", help="closed form against the Lindblad integrator"),
           "max element deviation allowed (default: compare.tolerance)")
    common(sub.add_parser("swap-demo", help="lossless resonant state transfer at t = pi/(2g)"),
           "fail (exit 3) if 1 - fidelity exceeds this")
    rp = sub.add_parser("reconstruct", help="rebuild a state from its normally-ordered moments")
    common(rp, "fail (exit 3) if the deviation from the direct construction exceeds this")
    rp.add_argument("--time", type=float, default=None,
                    help="rebuild the joint two-mode state at this time from Heisenberg moments")
    return ap


COMMANDS = {"evolve": _cmd_evolve, "compare": _cmd_compare, "swap-demo": _cmd_swap, "reconstruct": _cmd_reconstruct}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config_file(args.config, require_params=args.command != "reconstruct")
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TruncationError as exc:
        where = "" if exc.time is None else f" at t={exc.time}"
        print(f"truncation failure{where}: {exc} (last term {exc.last_term:.3e})", file=sys.stderr)
        return EXIT_TRUNCATION
    except TraceDriftError as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
