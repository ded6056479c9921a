"""Run a project's test suite against a candidate tree and classify the result.

Suites run in their own session with a scrubbed environment; on timeout the
whole process group is killed so no orphans remain.
"""

from __future__ import annotations

import os
import re
import shlex
import signal
import subprocess
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import PatchEvalError


class TestSuiteMissing(PatchEvalError):
    """Project has no suite; the task is excluded from test statistics."""


class TestStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    COMPILE_ERROR = "compile-error"
    TIMEOUT_HANG = "timeout-hang"


@dataclass
class TestProfile:
    command: str
    timeout: float = 600.0
    serialize: bool = False  # suite binds fixed ports etc; one at a time per project
    env: dict = field(default_factory=dict)
    log_excerpt_bytes: int = 4096


@dataclass
class TestOutcome:
    status: TestStatus
    cases_total: int | None = None
    cases_passed: int | None = None
    duration: float = 0.0
    log_excerpt: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "cases_total": self.cases_total,
            "cases_passed": self.cases_passed,
            "duration": self.duration,
            "log_excerpt": self.log_excerpt,
        }


_SCRUBBED_ENV_KEEP = ("PATH", "TMPDIR", "SHELL", "TERM")

# Best-effort per-case count patterns for common runners; exit code stays
# authoritative for the status.
_COUNT_PATTERNS = [
    re.compile(r"(?P<passed>\d+) passed(?:, (?P<failed>\d+) failed)?"),
    re.compile(r"(?P<passed>\d+)/(?P<total>\d+) tests? passed"),
    re.compile(r"Tests?:\s*(?P<passed>\d+) passed.*?(?P<total>\d+) total", re.DOTALL),
    re.compile(r"(?P<percent>\d+)% tests passed, (?P<failed>\d+) tests failed out of (?P<total>\d+)"),
]


def _parse_counts(log: str) -> tuple[int | None, int | None]:
    for pattern in _COUNT_PATTERNS:
        m = pattern.search(log)
        if not m:
            continue
        groups = m.groupdict()
        passed = int(groups["passed"]) if groups.get("passed") else None
        total = int(groups["total"]) if groups.get("total") else None
        failed = int(groups["failed"]) if groups.get("failed") else None
        if total is None and passed is not None:
            total = passed + (failed or 0)
        if passed is None and total is not None and failed is not None:
            passed = total - failed
        return total, passed
    return None, None


def run_tests(workdir: str | Path, profile: TestProfile) -> TestOutcome:
    """Execute the suite under a wall-clock timeout.

    Exit 0 -> Pass; nonzero -> Fail; expiry -> TimeoutHang with the spawned
    process tree terminated (SIGTERM, then SIGKILL after a grace period).
    """
    if not profile.command or not profile.command.strip():
        raise TestSuiteMissing("no test command configured")
    workdir = Path(workdir)
    argv = shlex.split(profile.command)

    env = {k: v for k, v in os.environ.items() if k in _SCRUBBED_ENV_KEEP}
    env["LC_ALL"] = "C"
    env["LANG"] = "C"
    env.update(profile.env)

    start = time.monotonic()
    proc = subprocess.Popen(
        argv,
        cwd=workdir,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        env=env,
        start_new_session=True,  # own process group: killable as a tree
    )
    try:
        output, _ = proc.communicate(timeout=profile.timeout)
        duration = time.monotonic() - start
        log = output.decode(errors="replace")
        total, passed = _parse_counts(log)
        status = TestStatus.PASS if proc.returncode == 0 else TestStatus.FAIL
        if status is TestStatus.PASS and total is not None:
            passed = total if passed is None else passed
        return TestOutcome(
            status=status,
            cases_total=total,
            cases_passed=passed,
            duration=duration,
            log_excerpt=log[-profile.log_excerpt_bytes :],
        )
    except subprocess.TimeoutExpired:
        _kill_tree(proc)
        duration = time.monotonic() - start
        try:
            output, _ = proc.communicate(timeout=10)
            log = output.decode(errors="replace")
        except Exception:
            log = ""
        return TestOutcome(
            status=TestStatus.TIMEOUT_HANG,
            duration=duration,
            log_excerpt=log[-profile.log_excerpt_bytes :],
        )


def _kill_tree(proc: subprocess.Popen) -> None:
    try:
        pgid = os.getpgid(proc.pid)
    except ProcessLookupError:
        proc.poll()
        return
    for sig, grace in ((signal.SIGTERM, 2.0), (signal.SIGKILL, 10.0)):
        try:
            os.killpg(pgid, sig)
        except ProcessLookupError:
            return
        deadline = time.monotonic() + grace
        try:
            proc.wait(timeout=grace)  # reap our child so it cannot linger as a zombie
        except subprocess.TimeoutExpired:
            continue
        while time.monotonic() < deadline:
            if not _group_alive(pgid):
                return
            time.sleep(0.05)


def _group_alive(pgid: int) -> bool:
    try:
        os.killpg(pgid, 0)
        return True
    except ProcessLookupError:
        return False
    except PermissionError:
        return True


def group_has_survivors(pgid: int) -> bool:
    """Used by tests to assert no orphans outlive a TimeoutHang."""
    return _group_alive(pgid)
