"""Command-line interface: run one trial, run benchmark batches, render
traces, and materialize the built-in scenario suite."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import (
    AGENT_NAMES,
    compute_metrics,
    default_parallelism,
    run_batch,
    run_trial,
)
from .render import render_trace_file
from .scenario import ScenarioError
from .scenario_io import load_scenario
from .suite import write_suite


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    result = run_trial(scenario, args.agent, args.seed, trace_path=args.trace)
    print(json.dumps(result.to_json(), sort_keys=True, indent=2))
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    paths = sorted(Path(args.scenarios).glob("*.json"))
    if not paths:
        print(f"no scenario files in {args.scenarios}", file=sys.stderr)
        return 1
    scenarios = [load_scenario(p) for p in paths]
    agents = args.agents.split(",") if args.agents else list(AGENT_NAMES)
    results, errors = run_batch(
        scenarios,
        agents,
        trials=args.trials,
        batch_seed=args.seed,
        parallel=args.parallel,
        out_dir=args.out,
        progress=not args.quiet,
    )
    by_agent: dict[str, list] = {}
    for r in results:
        by_agent.setdefault(r.agent, []).append(r)
    for agent in sorted(by_agent):
        m = compute_metrics(by_agent[agent])
        print(
            f"{agent}: n={m.n} SPL={m.spl_mean:.3f}±{m.spl_ci95:.3f} "
            f"SR={m.sr:.3f}±{m.sr_ci95:.3f} DR={m.dr_mean:.2f}±{m.dr_ci95:.2f}"
        )
    if errors:
        print(f"{len(errors)} trial(s) errored; see results.jsonl", file=sys.stderr)
        return 1
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    out = render_trace_file(args.trace, args.out)
    print(out)
    return 0


def _cmd_suite(args: argparse.Namespace) -> int:
    for path in write_suite(args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrsearch",
        description="Correlational object-search planning benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single trial")
    p_run.add_argument("--scenario", required=True, help="scenario JSON file")
    p_run.add_argument("--agent", required=True, choices=AGENT_NAMES)
    p_run.add_argument("--seed", type=int, required=True)
    p_run.add_argument("--trace", default=None, help="write a step trace JSON here")
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="run a benchmark batch")
    p_bench.add_argument("--scenarios", required=True, help="directory of scenario JSON files")
    p_bench.add_argument("--trials", type=int, required=True, help="trials per (scenario, agent)")
    p_bench.add_argument("--agents", default=None,
                         help=f"comma-separated subset of {','.join(AGENT_NAMES)}")
    p_bench.add_argument("--seed", type=int, default=0, help="batch seed")
    p_bench.add_argument("--parallel", type=int, default=default_parallelism(),
                         help="worker processes (default: CORRSEARCH_PARALLEL or CPU count)")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.add_argument("--quiet", action="store_true")
    p_bench.set_defaults(func=_cmd_bench)

    p_render = sub.add_parser("render", help="render a trace to a vector image")
    p_render.add_argument("--trace", required=True)
    p_render.add_argument("--out", required=True)
    p_render.set_defaults(func=_cmd_render)

    p_suite = sub.add_parser("suite", help="write the built-in scenario suite")
    p_suite.add_argument("--out", required=True, help="output directory")
    p_suite.set_defaults(func=_cmd_suite)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
