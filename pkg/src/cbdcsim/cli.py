"""Command line: run scenarios, emit test vectors.

    cbdc-sim run <scenario.json> [--seed N] [--report out.json]
    cbdc-sim vectors [--out file]

Bare scenario names resolve against the bundled scenario directory, so
`cbdc-sim run double_spend.scn` works from anywhere.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .errors import ScenarioError
from .scenario import report_json, run_scenario
from .vectors import vectors_jsonl

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_MALFORMED = 2


def resolve_scenario_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("cbdcsim") / "scenarios"
    for candidate in (name, f"{name}.json", f"{name}.scn.json"):
        target = bundled / candidate
        if target.is_file():
            return Path(str(target))
    return path  # let the loader produce the error


def cmd_run(args: argparse.Namespace) -> int:
    try:
        report, code = run_scenario(
            resolve_scenario_path(args.scenario), seed_override=args.seed
        )
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED

    summary = report["summary"]
    print(f"scenario  : {report['name']} (seed {report['seed']})")
    print(f"payments  : {summary['payments_total']} total, "
          f"{summary['payments_completed']} completed, "
          f"{summary['payments_pending_sync']} pending-sync, "
          f"{summary['payments_refused']} refused")
    print(f"reconciles: {len(report['reconciliations'])}, "
          f"credits {summary['credits_total']}, voids {summary['voids']}, "
          f"double-spends {summary['double_spends']}, "
          f"frozen {summary['frozen_devices']}")
    cons = report["conservation"]
    print(f"conserved : {cons['checks']} checks, {cons['violations']} violations, "
          f"final_ok={cons['final_ok']}")
    timings = report["timings"]
    if timings["payments"]:
        prove = [t["prove_ms"] for t in timings["payments"] if t["prove_ms"]]
        verify = [t["verify_ms"] for t in timings["payments"] if t["verify_ms"]]
        if prove:
            print(f"timing    : prove avg {sum(prove)/len(prove):.1f} ms, "
                  f"verify avg {sum(verify)/len(verify):.1f} ms" if verify else "")
    failures = report["assertions"]["failures"]
    for f in failures:
        print(f"ASSERTION FAILED: {f['key']}: expected {f['expected']!r}, "
              f"got {f['actual']!r}", file=sys.stderr)

    if args.report:
        Path(args.report).write_bytes(report_json(report))
        print(f"report    : {args.report}")
    else:
        sys.stdout.write(report_json(report).decode())
    return code


def cmd_vectors(args: argparse.Namespace) -> int:
    text = vectors_jsonl()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbdc-sim",
        description="Deterministic offline-CBDC payment simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario file")
    run_p.add_argument("scenario", help="path or bundled scenario name")
    run_p.add_argument("--seed", type=int, default=None, help="override scenario seed")
    run_p.add_argument("--report", default=None, help="write the JSON report here")
    run_p.set_defaults(fn=cmd_run)

    vec_p = sub.add_parser("vectors", help="emit pinned test vectors (JSON lines)")
    vec_p.add_argument("--out", default=None, help="write vectors here")
    vec_p.set_defaults(fn=cmd_vectors)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
