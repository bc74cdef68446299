"""Command-line entry point: validate flows, run scenarios, render reports.

Exit codes: 0 ok, 2 validation error (bad files, bad graphs, bad scripts),
3 runtime I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core.graph import FlowGraph, FlowParseError, parse_flow, validate_graph
from .core.timeline import entries_from_csv
from .report import compute_report, default_bucket, format_report, render_marble
from .sim import ScenarioError, Simulation, parse_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


class _CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}") from exc


def _load_flows(paths: list[str]) -> list[FlowGraph]:
    graphs = []
    for path in paths:
        try:
            graph = parse_flow(_read(path))
        except FlowParseError as exc:
            raise _CliError(f"{path}: {exc}") from exc
        errors = [d for d in validate_graph(graph) if d.severity == "error"]
        if errors:
            listing = "\n".join(f"  {d}" for d in errors)
            raise _CliError(f"{path}: invalid flow\n{listing}")
        graphs.append(graph)
    return graphs


def _cmd_validate(args) -> int:
    failed = False
    for path in args.flow:
        try:
            graph = parse_flow(_read(path))
        except (FlowParseError, _CliError) as exc:
            print(f"{path}: {exc}")
            failed = True
            continue
        diags = validate_graph(graph)
        for d in diags:
            print(f"{path}: {d}")
        if any(d.severity == "error" for d in diags):
            failed = True
        else:
            print(f"{path}: ok ({len(graph.nodes)} nodes, {len(graph.wires())} wires)")
    return EXIT_VALIDATION if failed else EXIT_OK


def _cmd_run(args) -> int:
    graphs = _load_flows(args.flow)
    try:
        script = parse_scenario(_read(args.scenario))
        sim = Simulation(graphs, script, seed=args.seed, store_dir=args.store_dir)
        log = sim.run()
    except ScenarioError as exc:
        raise _CliError(f"{args.scenario}: {exc}") from exc

    nodes = args.nodes.split(",") if args.nodes else None
    if args.format == "marble":
        merged = FlowGraph([n for g in graphs for n in g.nodes])
        bucket = args.bucket_ms or default_bucket(log.entries, merged)
        try:
            output = render_marble(log.entries, bucket_ms=bucket, graph=merged, nodes=nodes)
        except ValueError as exc:
            raise _CliError(str(exc)) from exc
    else:
        output = log.to_csv()

    if args.out:
        try:
            Path(args.out).write_text(output, encoding="utf-8")
        except OSError as exc:
            raise _CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
        print(f"wrote {args.out} ({len(log)} timeline entries)")
    else:
        sys.stdout.write(output)
    return EXIT_OK


def _cmd_report(args) -> int:
    text = _read(args.timeline)
    try:
        entries = entries_from_csv(text)
    except (ValueError, IndexError) as exc:
        raise _CliError(f"{args.timeline}: not a timeline CSV: {exc}") from exc
    report = compute_report(entries)
    sys.stdout.write(format_report(report, args.metric, sink=args.sink))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="healflow",
        description="Self-healing dataflow runtime and fault-injection simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="co-simulate flows against a scenario script")
    run_p.add_argument("--flow", action="append", required=True,
                       help="flow document; repeat to assign one per instance, in order")
    run_p.add_argument("--scenario", required=True, help="scenario script (JSON)")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    run_p.add_argument("--out", help="write the timeline/diagram here instead of stdout")
    run_p.add_argument("--format", choices=("csv", "marble"), default="csv")
    run_p.add_argument("--nodes", help="comma-separated node filter for marble output")
    run_p.add_argument("--bucket-ms", type=int, default=None,
                       help="marble column width (default: fastest period / 4)")
    run_p.add_argument("--store-dir", help="directory for per-instance persistence files")
    run_p.set_defaults(fn=_cmd_run)

    val_p = sub.add_parser("validate", help="parse and validate flow documents")
    val_p.add_argument("--flow", action="append", required=True)
    val_p.set_defaults(fn=_cmd_validate)

    rep_p = sub.add_parser("report", help="compute metrics from a timeline CSV")
    rep_p.add_argument("--timeline", required=True)
    rep_p.add_argument("--metric", choices=("mttr", "loss"), required=True)
    rep_p.add_argument("--sink", help="restrict the loss report to one sink id")
    rep_p.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
