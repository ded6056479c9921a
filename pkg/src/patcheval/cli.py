"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 partial campaign failure.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
from datetime import date
from pathlib import Path

from . import analytics, fixtures, pipeline, triage
from .errors import ConfigError, PatchEvalError
from .miner import HistoryEmpty
from .store import RunStore

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _load(config_path: str) -> pipeline.CampaignConfig:
    return pipeline.parse_config(config_path)


def cmd_mine(args) -> int:
    config = _load(args.config)
    store = RunStore(config.store_path)
    tasks = pipeline.collect_tasks(config, store)
    if not tasks:
        raise HistoryEmpty("no qualifying commits in any configured project")
    for task in tasks:
        flag = "" if task.message_quality is None or task.message_quality.well_formed else "  [suspect message]"
        print(f"{task.task_id}  {task.kind.value:20s}  {task.function_name}{flag}")
    print(f"{len(tasks)} task(s) in store {store.path}")
    return EXIT_OK


def cmd_import(args) -> int:
    config = _load(args.config)
    store = RunStore(config.store_path)
    tasks = pipeline.import_tasks(args.file)
    known = store.task_ids()
    added = 0
    for task in tasks:
        if task.task_id not in known:
            store.append_task(task.to_dict())
            added += 1
    print(f"imported {added} task(s) ({len(tasks) - added} already present)")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load(args.config)
    result = pipeline.run_campaign(config)
    print(
        f"evaluated {result.evaluated} pair(s), {result.skipped} already complete, "
        f"{result.infrastructure_failures} infrastructure failure(s)"
    )
    return EXIT_PARTIAL if result.infrastructure_failures else EXIT_OK


def cmd_triage_serve(args) -> int:
    config = _load(args.config)
    store = RunStore(config.store_path)
    service = triage.TriageService(
        store, bind=args.bind, token=args.token, static_dir=args.static_dir
    )
    print(f"triage service on {service.address} (Ctrl-C to stop)", flush=True)

    def handle_signal(signum, frame):
        raise KeyboardInterrupt

    signal.signal(signal.SIGTERM, handle_signal)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.shutdown()
    return EXIT_OK


def cmd_report(args) -> int:
    config = _load(args.config)
    store = RunStore(config.store_path)
    views = analytics.build_views(store)
    strict = not args.allow_unreviewed
    if strict and not store.campaign_state().get("sealed"):
        raise analytics.UnsealedVerdicts(
            "campaign is not sealed; run `patcheval seal` first or pass --allow-unreviewed"
        )
    tables: dict[str, object] = {
        "success_by_project_provider": analytics.success_rate(views, strict=strict),
        "success_by_kind": analytics.kind_split(views, strict=strict),
        "file_size_bins": analytics.bin_rates(views, "file_loc", strict=strict),
        "function_size_bins": analytics.bin_rates(views, "function_loc", strict=strict),
        "size_significance": analytics.size_significance(views, strict=strict),
    }
    if args.cutoff:
        tables["cutoff_split"] = analytics.cutoff_split(
            views, date.fromisoformat(args.cutoff), strict=strict
        )
    stats = triage.TriageStore(store).agreement()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = analytics.render_report(tables, args.format)
    for name, content in files.items():
        (out_dir / name).write_text(content)
    (out_dir / "agreement.json").write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True))
    print(f"wrote {len(files) + 1} file(s) to {out_dir}")
    return EXIT_OK


def cmd_seal(args) -> int:
    config = _load(args.config)
    store = RunStore(config.store_path)
    state = triage.TriageStore(store).seal(override_disputes=args.override_disputes)
    print(f"campaign sealed at {state['sealed_at']}")
    return EXIT_OK


def cmd_build_fixtures(args) -> int:
    manifest = fixtures.build_fixture_corpus(args.out_dir)
    print(f"built {len(manifest['cases'])} fixture case(s) under {args.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patcheval",
        description="Evaluate LLM-generated patches on C codebases: mine, run, triage, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="scan configured repositories into tasks")
    p.add_argument("-c", "--config", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("import", help="import hand-built tasks from a JSONL file")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("file")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("run", help="evaluate every (task x provider) pair")
    p.add_argument("-c", "--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("triage-serve", help="serve the two-reviewer triage API/UI")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--bind", default="127.0.0.1:8787")
    p.add_argument("--token", default=None, help="shared bearer token")
    p.add_argument("--static-dir", default=None, help="directory with the review UI build")
    p.set_defaults(func=cmd_triage_serve)

    p = sub.add_parser("report", help="compute tables and write report files")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-o", "--out", default="report")
    p.add_argument("--format", choices=analytics.FORMATS, default="plain")
    p.add_argument("--cutoff", default=None, help="knowledge-cutoff date (YYYY-MM-DD)")
    p.add_argument(
        "--allow-unreviewed",
        action="store_true",
        help="report over reviewed records only instead of failing on gaps",
    )
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("seal", help="freeze verdicts for analytics")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--override-disputes", action="store_true")
    p.set_defaults(func=cmd_seal)

    p = sub.add_parser("build-fixtures", help="materialize the demo corpus")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_build_fixtures)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PatchEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
