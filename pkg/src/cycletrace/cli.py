"""Command line front end.

Commands:
  analyze      run a trace (file or socket) through a machine model
  diff         compare two saved analysis reports
  trace        execute a toy program and emit its instruction trace
  model-check  load and validate a machine model file

Exit codes: 0 success, 1 usage error, 2 input or parse error,
3 wire-protocol error, 4 analysis error.
"""

from __future__ import annotations

import argparse
import sys

from .analysis import AnalysisReport, analyze, parse_regions
from .brokers import FileBroker, SocketBroker, send_trace
from .diff import (
    diff_reports,
    measured_delta_from_pairs,
    parse_ground_truth,
    render_diff,
)
from .errors import (
    AnalysisError,
    ModelError,
    ProtocolError,
    TraceParseError,
    TruncatedTraceError,
)
from .lsunit import AliasPolicy
from .model import load_model, validate_model
from .toyisa import ProgramError, execute, parse_program
from .trace import render_trace
from .views import TimelineRecorder, render_summary, render_timeline


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the contract reserves 2 for
    # input errors, so remap usage problems to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _window(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ValueError("expected FIRST..LAST")
    first, last = int(lo, 0), int(hi, 0)
    if last < first:
        raise ValueError("window end precedes start")
    return first, last


def _endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError("expected HOST:PORT")
    return host, int(port)


def build_parser() -> _Parser:
    parser = _Parser(prog="cycletrace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze an instruction trace")
    p.add_argument("--model", required=True, help="machine model file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="trace file to analyze")
    src.add_argument("--connect", type=_endpoint, metavar="HOST:PORT",
                     help="pull the trace from a producer at HOST:PORT")
    src.add_argument("--listen", type=int, metavar="PORT",
                     help="accept one producer connection on PORT")
    p.add_argument("--alias-policy", choices=[p.value for p in AliasPolicy],
                   default=AliasPolicy.METADATA.value,
                   help="memory aliasing assumption (default: metadata)")
    p.add_argument("--regions", help="region file restricting the analysis")
    p.add_argument("--timeline", type=_window, metavar="FIRST..LAST",
                   help="record and print a timeline for this seq_id window")
    p.add_argument("--out", help="write the analysis report (JSON) here")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("diff", help="compare two analysis reports")
    p.add_argument("--base", required=True, help="baseline report file")
    p.add_argument("--cand", required=True, help="candidate report file")
    p.add_argument("--ground", help="measured cycle pairs for error reporting")
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("trace", help="run a toy program, emit its trace")
    p.add_argument("--program", required=True, help="toy program file")
    dst = p.add_mutually_exclusive_group(required=True)
    dst.add_argument("--out", help="trace file to write ('-' for stdout)")
    dst.add_argument("--connect", type=_endpoint, metavar="HOST:PORT",
                     help="stream the trace to an analyzer at HOST:PORT")
    p.add_argument("--max-steps", type=int, default=100_000,
                   help="execution step budget (default: 100000)")
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("model-check", help="validate a machine model file")
    p.add_argument("--model", required=True, help="machine model file")
    p.set_defaults(func=_cmd_model_check)

    return parser


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _cmd_analyze(args) -> int:
    model = load_model(_read(args.model))
    validate_model(model)
    regions = parse_regions(_read(args.regions)) if args.regions else None
    recorder = TimelineRecorder(args.timeline) if args.timeline else None

    if args.trace:
        broker = FileBroker(args.trace)
        source = args.trace
    elif args.connect:
        host, port = args.connect
        broker = SocketBroker.connect(host, port)
        source = f"{host}:{port}"
    else:
        print(f"listening on 127.0.0.1:{args.listen}", file=sys.stderr)
        broker = SocketBroker.listen(args.listen)
        source = f"listen:{args.listen}"

    try:
        report = analyze(
            model,
            broker,
            source=source,
            alias_policy=AliasPolicy(args.alias_policy),
            regions=regions,
            recorder=recorder,
        )
    finally:
        broker.close()

    if report.truncated:
        print("warning: trace ended without an end-of-stream marker",
              file=sys.stderr)
    sys.stdout.write(render_summary_block(report))
    if recorder is not None:
        text = render_timeline(recorder.rows)
        if text:
            sys.stdout.write("\n" + text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report.to_json())
    return 0


def render_summary_block(report: AnalysisReport) -> str:
    out = render_summary(report.summary)
    if report.regions is not None:
        r = report.regions
        out += f"{'Region Visits:':<18} {r.visits}\n"
        out += f"{'Region Instrs:':<18} {r.instructions}\n"
        out += f"{'Region Cycles:':<18} {r.cycles}\n"
    return out


def _cmd_diff(args) -> int:
    base = AnalysisReport.from_json(_read(args.base))
    cand = AnalysisReport.from_json(_read(args.cand))
    measured = None
    if args.ground:
        measured = measured_delta_from_pairs(parse_ground_truth(_read(args.ground)))
    sys.stdout.write(render_diff(diff_reports(base, cand, measured)))
    return 0


def _cmd_trace(args) -> int:
    program = parse_program(_read(args.program))
    truncated = False
    try:
        instructions = execute(program, max_steps=args.max_steps)
    except TruncatedTraceError as e:
        instructions = e.partial
        truncated = True
        print(f"warning: {e}", file=sys.stderr)

    if args.connect:
        host, port = args.connect
        # A truncated run ends the stream without the end frame so the
        # analyzer records the truncation too.
        send_trace(host, port, instructions,
                   model_hint=args.program, send_end=not truncated)
    elif args.out == "-":
        sys.stdout.write(render_trace(instructions))
    else:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(render_trace(instructions))
    return 4 if truncated else 0


def _cmd_model_check(args) -> int:
    model = load_model(_read(args.model))
    validate_model(model)
    print(f"model '{model.name}' ok: dispatch width {model.dispatch_width}, "
          f"{len(model.classes)} classes, {len(model.resources)} resources")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (TraceParseError, ModelError, ProgramError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TruncatedTraceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ProtocolError as e:
        print(f"protocol error: {e}", file=sys.stderr)
        return 3
    except AnalysisError as e:
        print(f"analysis error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
