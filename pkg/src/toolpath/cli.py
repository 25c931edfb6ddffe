"""Command line: ``toolpath eval``, ``toolpath fixtures gen``, ``toolpath report``, ``toolpath mock-agent``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .connectors import CallableConnector, connector_from_spec
from .corpus import load_corpus, write_corpus
from .fixtures import MockAgent, MockAgentKind, generate_corpus, full_shape_corpus, serve_jsonl
from .harness import SessionConfig, flatten, run_corpus
from .metrics import GROUP_KEYS, ScoredTask, group_metrics, summarize
from .model import ChallengeMode, PolicyType
from .paths import dump_paths
from .report import build_row, emit

logger = logging.getLogger("toolpath")

BUILTIN = "builtin:"
EXT = {"json": "json", "csv": "csv", "markdown": "md"}


def _connector_factory(spec: str, cases, seed: int):
    if spec.startswith(BUILTIN):
        kind = MockAgentKind(spec[len(BUILTIN):])
        agent = MockAgent(kind, cases, seed)
        return lambda: CallableConnector(agent)
    return lambda: connector_from_spec(spec)


def _mode_report(records: list[ScoredTask], paired: list[ScoredTask] | None = None) -> dict:
    report = summarize(records, paired)
    report.grouped = {key: group_metrics(records, key, paired) for key in GROUP_KEYS}
    return report.to_dict()


def _write_results(path: Path, results) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_results(path: str | Path) -> list[ScoredTask]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records += [ScoredTask.from_dict(t) for t in json.loads(line)["tasks"]]
    return records


def _write_row(row, out: Path, formats: list[str]) -> None:
    for fmt in formats:
        if fmt == "json":
            continue
        target = out.with_suffix(f".{EXT[fmt]}")
        target.write_text(emit([row], fmt), encoding="utf-8")
        logger.info("wrote %s", target)


def cmd_eval(args) -> int:
    cases = load_corpus(args.corpus)
    if not cases:
        logger.error("no cases found in %s", args.corpus)
        return 2
    modes = list(ChallengeMode) if args.mode == "all" else [ChallengeMode(args.mode)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    factory = _connector_factory(args.connector, cases, args.seed)

    records: dict[ChallengeMode, list[ScoredTask]] = {}
    protocol_errors = 0
    for mode in modes:
        config = SessionConfig(mode, args.step_budget, args.timeout, args.seed)
        results = run_corpus(cases, config, factory, args.workers)
        protocol_errors += sum(r.protocol_errors for r in results)
        records[mode] = flatten(results)
        _write_results(out.with_name(f"{out.stem}.{mode.value}.results.jsonl"), results)
        logger.info("%s: %d cases scored", mode.value, len(results))

    c1 = records.get(ChallengeMode.C1_FULL_EXECUTION)
    c2 = records.get(ChallengeMode.C2_REDACTED_HISTORY)
    c3 = records.get(ChallengeMode.C3_INJECTED_HISTORY)
    row = build_row(c1, c2, c3, args.label)
    doc = {
        "label": args.label,
        "seed": args.seed,
        "cases": len(cases),
        "modes": {
            m.value: _mode_report(records[m], c2 if m is ChallengeMode.C3_INJECTED_HISTORY else None)
            for m in modes
        },
        "leaderboard": row.to_dict(),
        "protocol_errors": protocol_errors,
    }
    out.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    _write_row(row, out, args.format)

    if args.dump_paths:
        dumps = {}
        for case in cases:
            for i, task in enumerate(case.tasks):
                if task.gold_graph is not None and len(task.gold_graph):
                    dumps[f"{case.id}#{i}"] = dump_paths(task.gold_graph)
        target = out.with_name(f"{out.stem}.paths.json")
        target.write_text(json.dumps(dumps, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    if protocol_errors and not args.allow_protocol_errors:
        logger.warning("%d task(s) ended with a protocol error", protocol_errors)
        return 1
    return 0


def cmd_fixtures_gen(args) -> int:
    if args.preset == "full":
        cases = full_shape_corpus(args.seed)
    else:
        subtype = PolicyType(args.multi_subtype) if args.multi_subtype else None
        cases = generate_corpus(args.tasks, args.per_combo, args.seed, subtype)
    write_corpus(cases, args.out)
    print(f"wrote {len(cases)} cases to {args.out}")
    return 0


def cmd_report(args) -> int:
    c1 = read_results(args.c1) if args.c1 else None
    c2 = read_results(args.c2) if args.c2 else None
    c3 = read_results(args.c3) if args.c3 else None
    row = build_row(c1, c2, c3, args.label)
    sys.stdout.write(emit([row], args.format))
    return 0


def cmd_mock_agent(args) -> int:
    agent = MockAgent(MockAgentKind(args.kind), load_corpus(args.corpus), args.seed)
    serve_jsonl(agent)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toolpath", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="run an agent over a corpus and score it")
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--mode", choices=["c1", "c2", "c3", "all"], default="all")
    ev.add_argument("--connector", required=True,
                    help="agent command line, http(s) URL, or builtin:<mock kind>")
    ev.add_argument("--workers", type=int, default=1)
    ev.add_argument("--out", default="report.json")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--label", default="agent")
    ev.add_argument("--timeout", type=float, default=30.0, help="seconds per turn")
    ev.add_argument("--step-budget", type=int, default=None,
                    help="tool-call steps per task (default 2 x gold calls + 2)")
    ev.add_argument("--format", nargs="+", choices=list(EXT), default=["json"],
                    help="extra leaderboard renderings written next to --out")
    ev.add_argument("--dump-paths", action="store_true")
    ev.add_argument("--allow-protocol-errors", action="store_true",
                    help="exit 0 even when some task hit a protocol error")
    ev.set_defaults(func=cmd_eval)

    fx = sub.add_parser("fixtures", help="synthetic corpus tools")
    fx_sub = fx.add_subparsers(dest="fixtures_command", required=True)
    gen = fx_sub.add_parser("gen", help="generate a skeleton corpus")
    gen.add_argument("--tasks", type=int, nargs="+", default=[2, 3, 4])
    gen.add_argument("--per-combo", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--preset", choices=["full"], default=None,
                     help="256 single-task plus 768 multi-task cases")
    gen.add_argument("--multi-subtype", choices=["MultiSerial", "MultiParallel", "MultiMixed"])
    gen.set_defaults(func=cmd_fixtures_gen)

    rep = sub.add_parser("report", help="build a leaderboard row from saved results")
    rep.add_argument("--c1")
    rep.add_argument("--c2")
    rep.add_argument("--c3")
    rep.add_argument("--label", default="agent")
    rep.add_argument("--format", choices=list(EXT), default="markdown")
    rep.set_defaults(func=cmd_report)

    mock = sub.add_parser("mock-agent", help="serve a scripted agent over stdin/stdout")
    mock.add_argument("--kind", choices=[k.value for k in MockAgentKind], default="perfect")
    mock.add_argument("--corpus", required=True)
    mock.add_argument("--seed", type=int, default=0)
    mock.set_defaults(func=cmd_mock_agent)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
