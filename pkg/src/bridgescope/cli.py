"""Command line: ``analyze`` historical traces, ``monitor`` pending unlocks, ``simulate`` datasets."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import CONFIG_ENV, Matching, load_config
from .errors import BridgeScopeError
from .ingest import adaptor_pull, dumps_record, read_trace_file
from .monitor import DecisionLog, Monitor, replay
from .properties import check_all
from .report import DEFAULT_GAP, Report, ReportView, input_digest, report_filter_sort
from .sequences import assemble
from .simulator import gen_dataset, load_scenario

EXIT_OK, EXIT_VIOLATIONS, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("bridgescope")


def _matching(value: str | None) -> Matching | None:
    return None if value is None else Matching(value)


def cmd_analyze(args) -> int:
    view = ReportView(bug=args.bug, from_block=args.from_block, to_block=args.to_block,
                      address=args.address, tx=args.tx, sort=args.sort, fmt=args.format)
    cfg = load_config(args.config)
    warnings: list = []
    records = []
    for path in args.traces:
        records.extend(read_trace_file(path, strict=not args.lenient, errors=warnings,
                                       first_ordinal=len(records)))
    for path in args.actions or ():
        records.extend(adaptor_pull(path, strict=not args.lenient, errors=warnings,
                                    first_ordinal=len(records)))
    ds = assemble(records, cfg)
    violations = check_all(ds, cfg, _matching(args.matching), cascade=args.cascade)
    report = Report(violations, input_digest(records), args.gap, ds.dropped)
    text = report_filter_sort(report, view)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if warnings:
        print(f"{len(warnings)} malformed record(s) skipped", file=sys.stderr)
    return EXIT_VIOLATIONS if violations else EXIT_OK


def cmd_monitor(args) -> int:
    cfg = load_config(args.config)
    mon = Monitor(cfg, _matching(args.matching), DecisionLog(args.log) if args.log else None)
    aborted = 0
    for line in sys.stdin:
        if not line.strip():
            continue
        decision = mon.screen_line(line)
        aborted += decision.verdict.value == "abort"
        sys.stdout.write(dumps_record(decision.to_record(with_latency=not args.no_latency)) + "\n")
        sys.stdout.flush()
    return EXIT_VIOLATIONS if aborted else EXIT_OK


def cmd_replay(args) -> int:
    cfg = load_config(args.config)
    mismatches = 0
    total = 0
    for logged, replayed in replay(DecisionLog.load(args.log), cfg, _matching(args.matching)):
        total += 1
        if logged != replayed:
            mismatches += 1
            print(f"decision {logged.get('id')!r} differs on replay", file=sys.stderr)
    print(f"{total} decisions replayed, {mismatches} mismatched")
    return EXIT_OK if mismatches == 0 else EXIT_VIOLATIONS


def cmd_simulate(args) -> int:
    lds = gen_dataset(load_scenario(args.spec))
    for path in lds.write(args.out):
        log.info("wrote %s", path)
    counts = lds.summary()
    print(" ".join(f"{k}={counts.get(k, 0)}" for k in ("benign", "UDE", "IEP", "UU")))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bridgescope", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help=f"bridge config JSON (default: ${CONFIG_ENV})")
        sp.add_argument("--matching", choices=[m.value for m in Matching],
                        help="override the config's lock/deposit matching mode")

    a = sub.add_parser("analyze", help="offline analysis of historical traces")
    a.add_argument("traces", nargs="+", help="v1 trace files")
    a.add_argument("--actions", action="append", help="relayer action log (repeatable)")
    common(a)
    a.add_argument("--cascade", action="store_true",
                   help="also report checks that fail only because an upstream stage failed")
    a.add_argument("--lenient", action="store_true", help="skip malformed records instead of failing")
    a.add_argument("--gap", type=int, default=DEFAULT_GAP, help="cluster gap in blocks")
    a.add_argument("--bug", help="UDE, IEP or UU")
    a.add_argument("--from-block", type=int)
    a.add_argument("--to-block", type=int)
    a.add_argument("--address")
    a.add_argument("--tx")
    a.add_argument("--sort", default="block", help="block, tx or bug")
    a.add_argument("--format", default="jsonl", help="jsonl or table")
    a.add_argument("-o", "--output")
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("monitor", help="screen pending unlocks read from stdin")
    common(m)
    m.add_argument("--log", help="append decisions to this log file")
    m.add_argument("--no-latency", action="store_true", help="omit latency from output")
    m.set_defaults(func=cmd_monitor)

    r = sub.add_parser("replay", help="re-run a monitor decision log and compare")
    r.add_argument("log")
    common(r)
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("simulate", help="generate a labeled dataset")
    s.add_argument("spec", help="scenario JSON")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BridgeScopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
