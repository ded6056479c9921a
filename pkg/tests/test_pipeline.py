import json
import shutil
from pathlib import Path

import pytest

import campaign_helpers as helpers
from patcheval.fixtures import build_fixture_corpus
from patcheval.miner import CommitKind, SelectionCriteria, mine_repository
from patcheval.pipeline import (
    ConfigInvalid,
    SchemaViolation,
    evaluate_task,
    import_tasks,
    parse_config,
    run_campaign,
)
from patcheval.providers import Gateway, ProviderConfig
from patcheval.store import RunStore

pytestmark = pytest.mark.skipif(
    shutil.which("clang") is None or shutil.which("cc") is None,
    reason="requires cc and clang",
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    manifest = build_fixture_corpus(out)
    return out, manifest


def small_config_text(n_cases=2, providers=("sim_correct", "sim_undeclared"), workers=1):
    return helpers.small_config_text(
        "store-small", n_cases=n_cases, providers=providers, workers=workers
    )


@pytest.fixture
def small_campaign(corpus):
    out, manifest = corpus
    config_path = out / "campaign-small.ini"
    config_path.write_text(small_config_text())
    store_dir = out / "store-small"
    if store_dir.exists():
        shutil.rmtree(store_dir)
    return out, manifest, config_path


# --- config -----------------------------------------------------------------------


def test_parse_config_resolves_paths(corpus):
    out, _ = corpus
    config = parse_config(out / "campaign.ini")
    assert config.store_path == out / "store"
    assert len(config.projects) == 7
    assert len(config.providers) == 8
    assert all(p.is_replay for p in config.providers)


def test_config_missing_fixture_dir_invalid(tmp_path, corpus):
    out, _ = corpus
    text = small_config_text(providers=("sim_missing_dir",))
    bad = out / "campaign-bad.ini"
    bad.write_text(text)
    with pytest.raises(ConfigInvalid):
        parse_config(bad)


def test_config_duplicate_projects_invalid(corpus, tmp_path):
    out, _ = corpus
    config = parse_config(out / "campaign.ini")
    config.projects.append(config.projects[0])
    with pytest.raises(ConfigInvalid):
        config.validate()


def test_config_zero_workers_invalid(corpus):
    out, _ = corpus
    config = parse_config(out / "campaign.ini")
    config.workers = 0
    with pytest.raises(ConfigInvalid):
        config.validate()


# --- import -----------------------------------------------------------------------


IMPORT_ROW = {
    "task_id": "hand-0001",
    "project": "handmade",
    "kind": "bug-fix",
    "message": "Fix the comparison of limits in range_check",
    "context_file_path": "range.c",
    "context_file_pre": "int range_check(int v)\n{\n    return v > 5;\n}\n",
    "function_name": "range_check",
    "human_function_post": "int range_check(int v)\n{\n    return v >= 5;\n}\n",
    "author_date": "2024-04-01",
}


def test_import_tasks_valid_row(tmp_path):
    path = tmp_path / "tasks.jsonl"
    path.write_text(json.dumps(IMPORT_ROW) + "\n")
    tasks = import_tasks(path)
    assert len(tasks) == 1
    task = tasks[0]
    assert task.kind is CommitKind.BUG_FIX
    assert task.function_span_pre == (1, 4)
    assert task.file_loc == 4 and task.function_loc == 4
    assert task.patch_loc == 2


def test_import_missing_field_names_it(tmp_path):
    row = dict(IMPORT_ROW)
    del row["function_name"]
    path = tmp_path / "tasks.jsonl"
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(SchemaViolation, match="function_name"):
        import_tasks(path)


def test_imported_task_flows_like_mined(tmp_path):
    path = tmp_path / "tasks.jsonl"
    path.write_text(json.dumps(IMPORT_ROW) + "\n")
    task = import_tasks(path)[0]
    fixtures_dir = tmp_path / "responses"
    fixtures_dir.mkdir()
    (fixtures_dir / "hand-0001").write_text("```c\n" + IMPORT_ROW["human_function_post"] + "```\n")
    provider = ProviderConfig(provider_id="replay", endpoint=str(fixtures_dir))
    store = RunStore(tmp_path / "store")
    record = evaluate_task(task, provider, None, store, Gateway())
    assert record["suggestion"] == "IdenticalToHuman"
    assert set(record["task"]) == set(task.to_dict())


# --- single-pair evaluation ----------------------------------------------------------


def task_and_project(out, manifest, name, config_path="campaign.ini"):
    config = parse_config(out / config_path)
    project = next(p for p in config.projects if p.name == name)
    tasks = mine_repository(project.repo_path, name, SelectionCriteria())
    return tasks[0], project, config


def test_evaluate_correct_patch_passes(corpus, tmp_path):
    out, manifest = corpus
    task, project, config = task_and_project(out, manifest, "deque")
    provider = next(p for p in config.providers if p.provider_id == "sim_correct")
    store = RunStore(tmp_path / "store")
    record = evaluate_task(task, provider, project, store, Gateway())
    assert record["verification"]["compile_outcome"]["ok"] is True
    assert record["validation"]["status"] == "pass"
    assert record["suggestion"] == "IdenticalToHuman"
    assert record["issue_categories"] == {}
    assert (tmp_path / "store" / record["raw_ref"]).is_file()


def test_evaluate_undeclared_identifier(corpus, tmp_path):
    out, manifest = corpus
    task, project, config = task_and_project(out, manifest, "deque")
    provider = next(p for p in config.providers if p.provider_id == "sim_undeclared")
    store = RunStore(tmp_path / "store")
    record = evaluate_task(task, provider, project, store, Gateway())
    assert record["verification"]["compile_outcome"]["ok"] is False
    assert record["issue_categories"].get("UndeclaredIdentifier") == 1
    assert record["validation"] == {"skipped": True, "reason": "compile-error"}
    assert record["suggestion"] == "UncompilableUndeclared"


def test_evaluate_context_overflow_skips_both_stages(corpus, tmp_path):
    out, manifest = corpus
    task, project, config = task_and_project(out, manifest, "deque")
    provider = next(p for p in config.providers if p.provider_id == "sim_correct")
    tiny = ProviderConfig(
        provider_id="tiny", endpoint=provider.endpoint, max_context_tokens=5
    )
    store = RunStore(tmp_path / "store")
    record = evaluate_task(task, tiny, project, store, Gateway())
    assert record["machine_flags"].get("context_overflow")
    assert record["verification"]["skipped"] and record["validation"]["skipped"]


def test_evaluate_raw_recoverable_when_extraction_fails(corpus, tmp_path):
    out, manifest = corpus
    task, project, config = task_and_project(out, manifest, "jsonsize")
    provider = next(p for p in config.providers if p.provider_id == "sim_empty")
    store = RunStore(tmp_path / "store")
    record = evaluate_task(task, provider, project, store, Gateway())
    assert record["machine_flags"].get("no_code_found")
    assert record["patch"]["is_empty"] is True
    raw = store.read_raw(RunStore.record_key(task.task_id, provider.provider_id))
    assert "no new code is needed" in raw


def test_evaluate_isolation(corpus, tmp_path):
    """Nothing outside the store is modified by an evaluation."""
    out, manifest = corpus
    task, project, config = task_and_project(out, manifest, "jsonobj")
    provider = next(p for p in config.providers if p.provider_id == "sim_correct")
    store = RunStore(tmp_path / "store")

    def snapshot(root: Path):
        return {
            (str(p.relative_to(root)), p.stat().st_mtime_ns, p.stat().st_size)
            for p in root.rglob("*")
            if p.is_file()
        }

    before = snapshot(project.repo_path)
    evaluate_task(task, provider, project, store, Gateway())
    assert snapshot(project.repo_path) == before


# --- campaign ---------------------------------------------------------------------------


def test_campaign_cartesian_count(small_campaign):
    out, manifest, config_path = small_campaign
    config = parse_config(config_path)
    result = run_campaign(config)
    assert result.evaluated == 2 * 2
    assert len(result.store.records()) == 4
    keys = result.store.completed_keys()
    assert len(keys) == 4


def test_campaign_resume_skips_done(small_campaign):
    out, manifest, config_path = small_campaign
    config = parse_config(config_path)
    first = run_campaign(config)
    assert first.evaluated == 4
    second = run_campaign(parse_config(config_path))
    assert second.evaluated == 0 and second.skipped == 4
    assert len(second.store.records()) == 4


def test_campaign_idempotent_store_hash(corpus, tmp_path):
    out, manifest = corpus
    text = small_config_text()
    for store_name in ("store-h1", "store-h2"):
        cfg = out / f"campaign-{store_name}.ini"
        cfg.write_text(text.replace("store = store-small", f"store = {store_name}"))
        target = out / store_name
        if target.exists():
            shutil.rmtree(target)
        run_campaign(parse_config(cfg))
    h1 = RunStore(out / "store-h1").canonical_hash()
    h2 = RunStore(out / "store-h2").canonical_hash()
    assert h1 == h2


def test_campaign_crash_resume(corpus):
    """SIGKILL mid-campaign, rerun, earlier records untouched, no duplicates."""
    out, _ = corpus
    store_dir = out / "store-crash"
    if store_dir.exists():
        shutil.rmtree(store_dir)
    before, records, result = helpers.crash_resume_cycle(
        out, "campaign-crash.ini", "store-crash"
    )
    assert result.skipped == len(before)
    keys = [(r["task"]["task_id"], r["provider_id"]) for r in records]
    assert len(keys) == len(set(keys)) == 8
    for key, old in before.items():
        fresh = next(r for r in records if (r["task"]["task_id"], r["provider_id"]) == key)
        assert fresh == old


# --- stage monotonicity under fault injection ------------------------------------------------


def test_stage_monotonicity_fault_injection(corpus, tmp_path, monkeypatch):
    """validation ran => compile succeeded => a non-empty patch existed,
    across 100 randomized-fault evaluations."""
    out, _ = corpus
    records = helpers.run_fault_injection(out, tmp_path / "store", monkeypatch=monkeypatch)
    assert len(records) == 100
    helpers.assert_stage_monotonicity(records)
    statuses = {r["validation"].get("status") for r in records if not r["validation"].get("skipped")}
    assert "pass" in statuses  # the injector leaves some clean runs
