import os
import time

import pytest

from patcheval.validator import (
    TestOutcome,
    TestProfile,
    TestStatus,
    TestSuiteMissing,
    _parse_counts,
    run_tests,
)


def test_pass_and_fail_by_exit_code(tmp_path):
    assert run_tests(tmp_path, TestProfile(command="true")).status is TestStatus.PASS
    assert run_tests(tmp_path, TestProfile(command="false")).status is TestStatus.FAIL


def test_missing_suite_raises(tmp_path):
    with pytest.raises(TestSuiteMissing):
        run_tests(tmp_path, TestProfile(command="  "))


def test_status_stable_across_three_runs(tmp_path):
    script = tmp_path / "suite.sh"
    script.write_text("#!/bin/sh\nexit 0\n")
    script.chmod(0o755)
    profile = TestProfile(command="./suite.sh")
    statuses = {run_tests(tmp_path, profile).status for _ in range(3)}
    assert statuses == {TestStatus.PASS}


def test_timeout_hang_kills_whole_tree(tmp_path):
    pid_file = tmp_path / "pids.txt"
    script = tmp_path / "suite.sh"
    script.write_text(
        "#!/bin/sh\n"
        "sleep 1000 &\n"
        f"echo $! > {pid_file}\n"
        f"echo $$ >> {pid_file}\n"
        "while true; do :; done\n"
    )
    script.chmod(0o755)
    start = time.monotonic()
    outcome = run_tests(tmp_path, TestProfile(command="./suite.sh", timeout=2.0))
    elapsed = time.monotonic() - start
    assert outcome.status is TestStatus.TIMEOUT_HANG
    assert outcome.duration >= 2.0
    assert elapsed < 2.0 + 5.0
    time.sleep(0.3)  # allow reparent/reap
    for pid in [int(p) for p in pid_file.read_text().split()]:
        with pytest.raises(ProcessLookupError):
            os.kill(pid, 0)


def test_environment_is_scrubbed(tmp_path, monkeypatch):
    monkeypatch.setenv("PATCHEVAL_SENTINEL_SECRET", "leak")
    script = tmp_path / "suite.sh"
    script.write_text('#!/bin/sh\ntest -z "$PATCHEVAL_SENTINEL_SECRET"\n')
    script.chmod(0o755)
    assert run_tests(tmp_path, TestProfile(command="./suite.sh")).status is TestStatus.PASS


def test_log_excerpt_is_bounded(tmp_path):
    script = tmp_path / "suite.sh"
    script.write_text("#!/bin/sh\nyes filler | head -c 100000\nexit 1\n")
    script.chmod(0o755)
    outcome = run_tests(tmp_path, TestProfile(command="./suite.sh", log_excerpt_bytes=512))
    assert outcome.status is TestStatus.FAIL
    assert len(outcome.log_excerpt) <= 512


@pytest.mark.parametrize(
    "log,total,passed",
    [
        ("== 12 passed, 2 failed ==", 14, 12),
        ("8/8 tests passed", 8, 8),
        ("100% tests passed, 0 tests failed out of 20", 20, 20),
        ("no recognizable counters here", None, None),
    ],
)
def test_case_count_parsing(log, total, passed):
    assert _parse_counts(log) == (total, passed)


def test_pass_implies_counts_consistent(tmp_path):
    script = tmp_path / "suite.sh"
    script.write_text('#!/bin/sh\necho "5/5 tests passed"\nexit 0\n')
    script.chmod(0o755)
    outcome = run_tests(tmp_path, TestProfile(command="./suite.sh"))
    assert outcome.status is TestStatus.PASS
    assert outcome.cases_total == outcome.cases_passed == 5


def test_outcome_serialization_roundtrip():
    outcome = TestOutcome(TestStatus.PASS, 3, 3, 0.5, "ok")
    d = outcome.to_dict()
    assert d["status"] == "pass" and d["cases_total"] == 3
