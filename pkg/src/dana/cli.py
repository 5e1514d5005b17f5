"""Operator surface: prepare-metadata, ask, bench, replay, trace validate.

Exit codes are fixed for scriptability: 0 ok, 2 usage, 3 gateway,
4 sandbox, 5 parse, 6 iteration budget, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import uuid
from pathlib import Path

from . import bench as bench_mod
from .belief import UserQuery
from .config import RunConfig
from .errors import (
    DanaError,
    GatewayError,
    ParseError,
    SandboxError,
    UsageError,
)
from .executor import ExecutorLimits
from .gateway import Cassette, Gateway, HttpProvider
from .metadata import (
    ProfileConfig,
    create_metadata,
    discover_sources,
    load_catalog,
    save_catalog,
)
from .pipeline import run_query
from .replay import replay_run
from .sandboxclient import NullSandbox, ScriptedSandbox, start_session
from .state import FAILURE_BUDGET
from .trace import TraceWriter, validate_run

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GATEWAY = 3
EXIT_SANDBOX = 4
EXIT_PARSE = 5
EXIT_BUDGET = 6


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dana", description=__doc__)
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    prep = sub.add_parser("prepare-metadata", help="profile data and SOPs into a catalog")
    prep.add_argument("--data", required=True, help="directory of raw data sources")
    prep.add_argument("--sops", help="directory of SOP documents")
    prep.add_argument("--out", required=True, help="catalog output file")
    prep.add_argument("--sample-k", type=int, default=5)
    prep.add_argument("--chunk-chars", type=int, default=2000)
    prep.add_argument("--max-profile-rows", type=int, default=10_000)

    ask = sub.add_parser("ask", help="answer one analytical query")
    ask.add_argument("query", help="the natural-language question")
    ask.add_argument("--guideline", help="answer-format instructions")
    ask.add_argument("--catalog", help="catalog file (or use --auto-prepare)")
    ask.add_argument("--auto-prepare", action="store_true", help="profile --data/--sops on the fly")
    ask.add_argument("--data", help="data dir for --auto-prepare")
    ask.add_argument("--sops", help="SOP dir for --auto-prepare")
    ask.add_argument("--instructions", help="data-handling instructions file")
    ask.add_argument("--model", default=None, help="model id for the provider")
    ask.add_argument("--cassette", help="cassette file")
    ask.add_argument("--cassette-mode", choices=("record", "replay", "passthrough"), default=None)
    ask.add_argument("--sandbox-cmd", help="runner launch command (whitespace-split)")
    ask.add_argument("--sandbox-script", help="recorded sandbox replies (scripted session)")
    ask.add_argument("--max-iterations", type=int, default=None)
    ask.add_argument("--timeout-s", type=float, default=None, help="per-snippet timeout")
    ask.add_argument("--trace-dir", default=None)

    bench = sub.add_parser("bench", help="run a task suite and score it")
    bench.add_argument("--suite", required=True)
    bench.add_argument("--catalog", required=True)
    bench.add_argument("--cassette", help="cassette file or per-task cassette directory")
    bench.add_argument("--parallel", type=int, default=1)
    bench.add_argument("--lenient", action="store_true")
    bench.add_argument("--ordered", action="store_true", help="order-sensitive list scoring")
    bench.add_argument("--sop-override", help="per-suite SOP text file")
    bench.add_argument("--out-dir", default="bench-out")
    bench.add_argument("--model", default=None)
    bench.add_argument("--max-iterations", type=int, default=None)

    rep = sub.add_parser("replay", help="re-drive a recorded run from its trace")
    rep.add_argument("--trace", required=True)
    rep.add_argument("--catalog", help="override the catalog path recorded in the trace")

    trace = sub.add_parser("trace", help="trace file utilities")
    trace_sub = trace.add_subparsers(dest="trace_command", required=True)
    tval = trace_sub.add_parser("validate", help="check stage-order and sequence invariants")
    tval.add_argument("trace_file")

    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    for attr, key in (
        ("catalog", "catalog_path"),
        ("data", "data_dir"),
        ("sops", "sop_dir"),
        ("instructions", "instructions_path"),
        ("model", "model_id"),
        ("cassette", "cassette_path"),
        ("cassette_mode", "cassette_mode"),
        ("sandbox_script", "sandbox_script"),
        ("trace_dir", "trace_dir"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(config, key, value)
    if getattr(args, "sandbox_cmd", None):
        config.sandbox_cmd = args.sandbox_cmd.split()
    limits = config.limits
    if getattr(args, "max_iterations", None) is not None:
        limits = ExecutorLimits(**{**limits.to_dict(), "max_iterations": args.max_iterations})
    if getattr(args, "timeout_s", None) is not None:
        limits = ExecutorLimits(**{**limits.to_dict(), "snippet_timeout_s": args.timeout_s})
    config.limits = limits
    return config


def _build_gateway(config: RunConfig) -> Gateway:
    cassette = None
    if config.cassette_path:
        cassette = Cassette(config.cassette_path, mode=config.cassette_mode)
    provider = None
    if cassette is None or cassette.mode != "replay":
        provider = HttpProvider(timeout_s=120.0)
        # HttpProvider raises if unconfigured; that is the right failure
        # for record/passthrough modes, which need a live endpoint.
    return Gateway(provider=provider, cassette=cassette)


def _build_sandbox(config: RunConfig):
    if config.sandbox_script:
        return ScriptedSandbox.from_file(config.sandbox_script)
    if config.sandbox_cmd:
        allowed = [config.data_dir] if config.data_dir else []
        working_dir = config.data_dir or "."
        return start_session(config.sandbox_cmd, working_dir, allowed, config.sandbox_limits)
    return NullSandbox()


def cmd_prepare_metadata(args: argparse.Namespace) -> int:
    profile_config = ProfileConfig(
        sample_k=args.sample_k,
        max_profile_rows=args.max_profile_rows,
        chunk_chars=args.chunk_chars,
    )
    sources = discover_sources(args.data)
    sop_paths = []
    if args.sops:
        sop_paths = sorted(str(p) for p in Path(args.sops).rglob("*") if p.is_file())
    catalog = create_metadata(sources, sop_paths, profile_config)
    save_catalog(catalog, args.out)
    print(f"catalog written to {args.out}: {len(catalog.sources)} sources, {len(catalog.sops)} SOPs")
    return EXIT_OK


def cmd_ask(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if args.auto_prepare:
        if not config.data_dir:
            raise UsageError("--auto-prepare requires --data")
        sop_paths = []
        if config.sop_dir:
            sop_paths = sorted(str(p) for p in Path(config.sop_dir).rglob("*") if p.is_file())
        catalog = create_metadata(discover_sources(config.data_dir), sop_paths)
    else:
        config.validate(require_catalog=True)
        catalog = load_catalog(config.catalog_path)
    config.validate(require_catalog=False)

    run_id = f"ask-{uuid.uuid4().hex[:12]}"
    trace_path = Path(config.trace_dir) / f"{run_id}.trace.jsonl"
    trace = TraceWriter(trace_path, run_id=run_id)
    gateway = _build_gateway(config)
    sandbox = _build_sandbox(config)

    query = UserQuery(text=args.query, guideline=args.guideline)
    try:
        run = run_query(query, catalog, config, gateway, sandbox, trace)
    finally:
        sandbox.close()

    print(run.response.answer_text)
    print(run.response.supporting_summary, file=sys.stderr)
    print(f"trace: {trace_path}", file=sys.stderr)
    if run.context.final_status != "completed":
        return EXIT_BUDGET if run.context.failure_reason == FAILURE_BUDGET else 1
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.catalog_path = args.catalog
    config.validate(require_catalog=True)
    catalog = load_catalog(config.catalog_path)
    report, _results = bench_mod.run_suite(
        args.suite,
        catalog,
        config,
        parallelism=args.parallel,
        cassette_path=args.cassette,
        out_dir=args.out_dir,
        lenient=args.lenient,
        ordered=args.ordered,
        sop_override=args.sop_override,
    )
    print(report.render_table())
    print(f"results: {Path(args.out_dir) / 'results.jsonl'}", file=sys.stderr)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog) if args.catalog else None
    report = replay_run(args.trace, catalog)
    if report.ok:
        print(f"replay ok: {report.answer_text}")
        return EXIT_OK
    print("replay diverged:", file=sys.stderr)
    for mismatch in report.mismatches:
        print(f"  - {mismatch}", file=sys.stderr)
    return 1


def cmd_trace_validate(args: argparse.Namespace) -> int:
    violations = validate_run(args.trace_file)
    if not violations:
        print("trace ok: 0 violations")
        return EXIT_OK
    for violation in violations:
        print(f"{violation['kind']} at seq {violation['seq']}: {violation['detail']}")
    return 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "prepare-metadata":
            return cmd_prepare_metadata(args)
        if args.command == "ask":
            return cmd_ask(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "replay":
            return cmd_replay(args)
        if args.command == "trace":
            return cmd_trace_validate(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GatewayError as exc:
        print(f"gateway error: {exc}", file=sys.stderr)
        return EXIT_GATEWAY
    except SandboxError as exc:
        print(f"sandbox error: {exc}", file=sys.stderr)
        return EXIT_SANDBOX
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DanaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
