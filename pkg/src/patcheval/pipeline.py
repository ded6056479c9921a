"""Campaign orchestration: mining, generation, splicing, verification,
validation, and the resumable run store.

Every (task x provider) pair is evaluated exactly once per campaign with no
content retries; stage errors land in machine_flags and never abort the
campaign. Working directories are per-task, removed on success and retained
on failure.
"""

from __future__ import annotations

import configparser
import os
import shutil
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path

from . import diffs, splicer, triage, vcs
from .errors import ConfigError, PatchEvalError
from .miner import CommitKind, CommitTask, SelectionCriteria, mine_repository
from .prompts import PromptError, build_prompt
from .providers import (
    ContextOverflow,
    Gateway,
    GeneratedPatch,
    NoCodeFound,
    ProviderConfig,
    ProviderTimeout,
    TransportError,
    extract_patch,
)
from .store import RunStore
from .validator import TestProfile, TestStatus, TestSuiteMissing, run_tests
from .verifier import (
    AnalyzerProfile,
    BaselineCache,
    BuildProfile,
    verify,
)


class ConfigInvalid(ConfigError):
    pass


class SchemaViolation(PatchEvalError):
    pass


# Flags that mean the harness itself misbehaved (exit code 3), as opposed to
# content-level outcomes of a bad patch.
INFRASTRUCTURE_FLAGS = ("transport_error", "provider_timeout", "internal_error")


@dataclass
class ProjectConfig:
    name: str
    repo_path: Path
    build: BuildProfile
    analyzer: AnalyzerProfile
    test: TestProfile | None = None
    serialize_tests: bool = False


@dataclass
class CampaignConfig:
    store_path: Path
    projects: list[ProjectConfig]
    providers: list[ProviderConfig]
    criteria: SelectionCriteria = field(default_factory=SelectionCriteria)
    workers: int = 1
    seed_tasks: Path | None = None

    def validate(self) -> None:
        if self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")
        names = [p.name for p in self.projects]
        if len(names) != len(set(names)):
            raise ConfigInvalid(f"duplicate project names: {names}")
        provider_ids = [p.provider_id for p in self.providers]
        if len(provider_ids) != len(set(provider_ids)):
            raise ConfigInvalid(f"duplicate provider ids: {provider_ids}")
        if not self.providers:
            raise ConfigInvalid("at least one provider is required")
        for provider in self.providers:
            if provider.is_replay and not Path(provider.endpoint).is_dir():
                raise ConfigInvalid(
                    f"provider {provider.provider_id!r}: fixture directory missing: {provider.endpoint}"
                )
        for project in self.projects:
            if not project.repo_path.is_dir():
                raise ConfigInvalid(f"project {project.name!r}: repo missing: {project.repo_path}")


def parse_config(path: str | Path) -> CampaignConfig:
    """Load the sectioned key/value campaign file; relative paths are
    resolved against the config file's directory."""
    path = Path(path)
    if not path.is_file():
        raise ConfigInvalid(f"config file not found: {path}")
    base = path.parent
    parser = configparser.ConfigParser()
    parser.read(path)

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    campaign = parser["campaign"] if parser.has_section("campaign") else {}
    store_path = resolve(campaign.get("store", "store"))
    workers = int(campaign.get("workers", "1"))
    seed = campaign.get("seed_tasks")

    criteria_kwargs: dict = {}
    if parser.has_section("criteria"):
        crit = parser["criteria"]
        if "max_patch_loc" in crit:
            criteria_kwargs["max_patch_loc"] = crit.getint("max_patch_loc")
        if "min_message_tokens" in crit:
            criteria_kwargs["min_message_tokens"] = crit.getint("min_message_tokens")
        if "extensions" in crit:
            criteria_kwargs["extensions"] = tuple(
                e.strip() for e in crit["extensions"].split(",") if e.strip()
            )
        if "kinds" in crit:
            criteria_kwargs["allowed_kinds"] = {
                CommitKind(k.strip()) for k in crit["kinds"].split(",") if k.strip()
            }
        date_from, date_to = crit.get("date_from"), crit.get("date_to")
        if date_from or date_to:
            criteria_kwargs["date_range"] = (
                date.fromisoformat(date_from) if date_from else date(1970, 1, 1),
                date.fromisoformat(date_to) if date_to else date(9999, 12, 31),
            )
    criteria = SelectionCriteria(**criteria_kwargs)

    projects: list[ProjectConfig] = []
    providers: list[ProviderConfig] = []
    for section in parser.sections():
        if section.startswith("project:"):
            sec = parser[section]
            if "repo" not in sec or "build" not in sec:
                raise ConfigInvalid(f"[{section}] needs 'repo' and 'build'")
            test_profile = None
            if sec.get("test"):
                test_profile = TestProfile(
                    command=sec["test"],
                    timeout=sec.getfloat("test_timeout", 600.0),
                    serialize=sec.getboolean("serialize", False),
                )
            projects.append(
                ProjectConfig(
                    name=section.split(":", 1)[1],
                    repo_path=resolve(sec["repo"]),
                    build=BuildProfile(
                        build_cmd=sec["build"],
                        configure_cmd=sec.get("configure"),
                        timeout=sec.getfloat("build_timeout", 600.0),
                    ),
                    analyzer=AnalyzerProfile(
                        sources=sec.get("analyze", "*.c").split(),
                        timeout=sec.getfloat("analyze_timeout", 300.0),
                    ),
                    test=test_profile,
                    serialize_tests=sec.getboolean("serialize", False),
                )
            )
        elif section.startswith("provider:"):
            sec = parser[section]
            provider_id = section.split(":", 1)[1]
            endpoint = sec.get("endpoint", "")
            if not endpoint:
                raise ConfigInvalid(f"[{section}] needs 'endpoint'")
            if not endpoint.startswith(("http://", "https://")):
                endpoint = str(resolve(endpoint))
            env_name = sec.get(
                "api_key_env", f"PATCHEVAL_API_KEY_{provider_id.upper().replace('-', '_')}"
            )
            cutoff = sec.get("knowledge_cutoff")
            providers.append(
                ProviderConfig(
                    provider_id=provider_id,
                    endpoint=endpoint,
                    model_name=sec.get("model", ""),
                    max_context_tokens=sec.getint("max_context_tokens", 128_000),
                    timeout=sec.getfloat("timeout", 120.0),
                    rate_limit=sec.getint("rate_limit", 60),
                    knowledge_cutoff=date.fromisoformat(cutoff) if cutoff else None,
                    api_key=os.environ.get(env_name),
                    network_retries=sec.getint("network_retries", 2),
                    strict_output=sec.getboolean("strict_output", False),
                )
            )
    config = CampaignConfig(
        store_path=store_path,
        projects=projects,
        providers=providers,
        criteria=criteria,
        workers=workers,
        seed_tasks=resolve(seed) if seed else None,
    )
    config.validate()
    return config


# --- task import ------------------------------------------------------------------------

_IMPORT_REQUIRED = (
    "task_id",
    "project",
    "kind",
    "message",
    "context_file_path",
    "context_file_pre",
    "function_name",
    "human_function_post",
    "author_date",
)


def import_tasks(path: str | Path) -> list[CommitTask]:
    """Hand-built tasks (projects without mineable history) from JSONL.

    Derivable fields (LOC counts, spans, patch size) are computed when
    absent; structural violations name the line and field.
    """
    import json

    tasks: list[CommitTask] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"line {lineno}: not valid JSON: {exc}") from exc
            for fieldname in _IMPORT_REQUIRED:
                if fieldname not in row or row[fieldname] in (None, ""):
                    raise SchemaViolation(f"line {lineno}: missing field {fieldname!r}")
            try:
                kind = CommitKind(row["kind"])
            except ValueError as exc:
                raise SchemaViolation(f"line {lineno}: bad kind {row['kind']!r}") from exc
            pre = row["context_file_pre"]
            human = row["human_function_post"]
            span = None
            if kind is CommitKind.BUG_FIX:
                try:
                    located = splicer.locate_function(pre, row["function_name"])
                except splicer.SplicerError as exc:
                    raise SchemaViolation(
                        f"line {lineno}: function_name: {exc}"
                    ) from exc
                span = (located.start_line, located.end_line)
                pre_fn = splicer.extract_span(pre, located)
            else:
                pre_fn = ""
            patch_loc = row.get("patch_loc") or diffs.changed_line_count(
                diffs.make_unified(pre_fn, human)
            )
            tasks.append(
                CommitTask(
                    task_id=row["task_id"],
                    project=row["project"],
                    commit_id=row.get("commit_id", f"imported-{row['task_id']}"),
                    kind=kind,
                    message=row["message"],
                    context_file_path=row["context_file_path"],
                    context_file_pre=pre,
                    function_name=row["function_name"],
                    function_span_pre=span,
                    human_function_post=human,
                    file_loc=row.get("file_loc") or len(pre.splitlines()),
                    function_loc=row.get("function_loc")
                    or (span[1] - span[0] + 1 if span else len(human.splitlines())),
                    patch_loc=patch_loc,
                    author_date=date.fromisoformat(row["author_date"]),
                )
            )
    return tasks


# --- single-pair evaluation ----------------------------------------------------------------


def _skip(reason: str) -> dict:
    return {"skipped": True, "reason": reason}


def evaluate_task(
    task: CommitTask,
    provider: ProviderConfig,
    project: ProjectConfig | None,
    store: RunStore,
    gateway: Gateway,
    baseline_cache: BaselineCache | None = None,
    keep_workdir_on_failure: bool = True,
) -> dict:
    """One stage sequence, executed exactly once, never re-prompted."""
    key = RunStore.record_key(task.task_id, provider.provider_id)
    flags: dict = {}
    record: dict = {
        "task": task.to_dict(),
        "provider_id": provider.provider_id,
        # All request parameters persisted for reproducibility.
        "provider_request": {
            "model_name": provider.model_name,
            "request_params": provider.request_params,
            "strict_output": provider.strict_output,
            "attachment_mode": provider.attachment_mode,
            "replay": provider.is_replay,
        },
        "prompt": None,
        "raw_ref": None,
        "raw_latency": None,
        "patch": None,
        "splice_mode": None,
        "structure_delta": None,
        "candidate_function": None,
        "verification": _skip("not-run"),
        "validation": _skip("not-run"),
        "issue_categories": {},
        "suggestion": None,
        "machine_flags": flags,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }

    # Prompt
    try:
        prompt = build_prompt(task, strict_output=provider.strict_output)
        record["prompt"] = prompt.to_dict()
    except PromptError as exc:
        flags["prompt_error"] = str(exc)
        record["verification"] = _skip("prompt-error")
        record["validation"] = _skip("prompt-error")
        return record

    # Generation: one request; raw text persisted before parsing.
    raw = None
    try:
        raw = gateway.generate(prompt, provider)
        record["raw_ref"] = store.write_raw(key, raw.text)
        record["raw_latency"] = raw.latency
    except ContextOverflow as exc:
        flags["context_overflow"] = str(exc)
        record["verification"] = _skip("context-overflow")
        record["validation"] = _skip("context-overflow")
        return record
    except ProviderTimeout as exc:
        flags["provider_timeout"] = str(exc)
        record["verification"] = _skip("provider-error")
        record["validation"] = _skip("provider-error")
        return record
    except TransportError as exc:
        flags["transport_error"] = str(exc)
        record["verification"] = _skip("provider-error")
        record["validation"] = _skip("provider-error")
        return record

    # Extraction
    try:
        patch = extract_patch(raw, task)
    except NoCodeFound as exc:
        flags["no_code_found"] = str(exc)
        patch = GeneratedPatch(
            function_text="", scope="function", is_empty=True, is_partial=False,
            stripped_citations=list(raw.citations),
        )
    record["patch"] = patch.to_dict()

    if patch.is_empty or patch.is_partial:
        record["verification"] = _skip("empty-partial")
        record["validation"] = _skip("empty-partial")
        record["issue_categories"] = {"EmptyPartial": 1}
        record["suggestion"] = _suggest(record)
        return record

    # Splice
    try:
        if patch.scope == "whole-file":
            span = None
            if task.function_span_pre:
                span = splicer.locate_function(task.context_file_pre, task.function_name)
            spliced = splicer.adopt_whole_file(
                task.context_file_pre, patch.function_text, task.function_name, span
            )
        elif task.kind is CommitKind.BUG_FIX:
            span = splicer.locate_function(task.context_file_pre, task.function_name)
            spliced = splicer.splice(task.context_file_pre, span, patch.function_text)
        else:
            spliced = splicer.insert_function(task.context_file_pre, patch.function_text)
    except splicer.SplicerError as exc:
        flags["splice_error"] = str(exc)
        record["verification"] = _skip("splice-error")
        record["validation"] = _skip("splice-error")
        record["suggestion"] = _suggest(record)
        return record

    record["splice_mode"] = spliced.mode.value
    if spliced.structure_delta is not None:
        record["structure_delta"] = spliced.structure_delta.to_dict()
    try:
        out_span = splicer.locate_function(spliced.text, task.function_name)
        record["candidate_function"] = splicer.extract_span(spliced.text, out_span)
    except splicer.SplicerError:
        record["candidate_function"] = patch.function_text

    if project is None:
        record["suggestion"] = _suggest(record)
        return record

    # Verification + validation against real trees.
    workdir = store.path / "work" / key
    failed = False
    try:
        candidate_dir = workdir / "candidate"
        if candidate_dir.exists():
            shutil.rmtree(candidate_dir)
        vcs.export_tree(project.repo_path, f"{task.commit_id}^", candidate_dir)
        (candidate_dir / task.context_file_path).write_text(spliced.text)

        baseline_dir = store.path / "baselines" / f"{task.project}-{task.commit_id[:12]}"
        _materialize_baseline(project.repo_path, task.commit_id, baseline_dir)

        try:
            report = verify(
                candidate_dir,
                baseline_dir,
                project.build,
                project.analyzer,
                baseline_cache=baseline_cache,
                baseline_key=f"{task.project}-{task.commit_id[:12]}",
            )
        except PatchEvalError as exc:
            flags["verifier_error"] = str(exc)
            record["verification"] = _skip("verifier-error")
            record["validation"] = _skip("verifier-error")
            failed = True
            return record
        record["verification"] = report.to_dict()
        if report.analyzer_crashed:
            flags["analyzer_crash"] = True
        record["issue_categories"] = dict(report.issue_delta)

        if not report.compile_outcome.ok:
            record["validation"] = _skip("compile-error")
        elif project.test is None:
            record["validation"] = _skip("no-test-suite")
            flags["test_suite_missing"] = True
        else:
            try:
                outcome = run_tests(candidate_dir, project.test)
                record["validation"] = outcome.to_dict()
                if outcome.status is not TestStatus.PASS:
                    failed = True
            except TestSuiteMissing:
                record["validation"] = _skip("no-test-suite")
                flags["test_suite_missing"] = True
        record["suggestion"] = _suggest(record)
        failed = failed or not report.compile_outcome.ok
        return record
    except Exception as exc:  # stage errors never abort the campaign
        flags["internal_error"] = f"{type(exc).__name__}: {exc}"
        if record["verification"].get("skipped"):
            record["verification"] = _skip("internal-error")
        record["validation"] = _skip("internal-error")
        failed = True
        return record
    finally:
        if workdir.exists() and not (failed and keep_workdir_on_failure):
            shutil.rmtree(workdir, ignore_errors=True)


def _suggest(record: dict) -> str | None:
    suggestion = triage.suggest_category(record)
    return suggestion.value if suggestion else None


_baseline_export_lock = threading.Lock()


def _materialize_baseline(repo_path: Path, commit_id: str, baseline_dir: Path) -> None:
    """Export the human tree exactly once; concurrent workers wait, and a
    tree from a previous (possibly killed) run is only trusted when its
    completion marker exists."""
    marker = baseline_dir.parent / (baseline_dir.name + ".complete")
    if marker.exists():
        return
    with _baseline_export_lock:
        if marker.exists():
            return
        if baseline_dir.exists():
            shutil.rmtree(baseline_dir)
        vcs.export_tree(repo_path, commit_id, baseline_dir)
        marker.touch()


# --- campaign loop ----------------------------------------------------------------------------


def collect_tasks(config: CampaignConfig, store: RunStore) -> list[CommitTask]:
    """Mined plus imported tasks, persisted once; reruns reuse the stored set."""
    stored = store.tasks()
    if stored:
        return [CommitTask.from_dict(t) for t in stored]
    tasks: list[CommitTask] = []
    for project in config.projects:
        tasks.extend(mine_repository(project.repo_path, project.name, config.criteria))
    if config.seed_tasks:
        tasks.extend(import_tasks(config.seed_tasks))
    for task in tasks:
        store.append_task(task.to_dict())
    return tasks


@dataclass
class CampaignResult:
    store: RunStore
    evaluated: int
    skipped: int
    infrastructure_failures: int


def run_campaign(config: CampaignConfig, store: RunStore | None = None) -> CampaignResult:
    """Evaluate every (task x provider) pair once; resumable by key."""
    config.validate()
    store = store or RunStore(config.store_path)
    tasks = collect_tasks(config, store)
    projects = {p.name: p for p in config.projects}
    gateway = Gateway()
    baseline_cache = BaselineCache()
    done = store.completed_keys()

    pairs = [
        (task, provider)
        for task in sorted(tasks, key=lambda t: t.task_id)
        for provider in sorted(config.providers, key=lambda p: p.provider_id)
        if RunStore.record_key(task.task_id, provider.provider_id) not in done
    ]
    skipped = sum(len(config.providers) for _ in tasks) - len(pairs)

    test_locks: dict[str, threading.Lock] = {
        p.name: threading.Lock() for p in config.projects if p.serialize_tests
    }
    failures = 0
    failures_lock = threading.Lock()

    def work(pair):
        nonlocal failures
        task, provider = pair
        project = projects.get(task.project)
        lock = test_locks.get(task.project)
        if lock:
            with lock:
                record = evaluate_task(task, provider, project, store, gateway, baseline_cache)
        else:
            record = evaluate_task(task, provider, project, store, gateway, baseline_cache)
        if any(record["machine_flags"].get(f) for f in INFRASTRUCTURE_FLAGS):
            with failures_lock:
                failures += 1
        store.append_record(record)

    if config.workers == 1:
        for pair in pairs:
            work(pair)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(work, pairs))

    store.write_index()
    return CampaignResult(
        store=store, evaluated=len(pairs), skipped=skipped, infrastructure_failures=failures
    )
