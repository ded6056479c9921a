"""Compile the candidate tree, run the static analyzer, bucket the findings.

The analyzer is the clang static analyzer driven per translation unit with
plist output (machine readable); compiler front-end errors are parsed from
stderr when the build fails. Categories follow the eight-row taxonomy; what
does not fit is reported as Uncategorized, never silently merged.
"""

from __future__ import annotations

import glob
import json
import plistlib
import re
import shlex
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import PatchEvalError


class VerifierError(PatchEvalError):
    pass


class BuildToolMissing(VerifierError):
    pass


class BuildTimeout(VerifierError):
    pass


class AnalyzerMissing(VerifierError):
    pass


class AnalyzerCrash(VerifierError):
    """Recorded on the evaluation record; never fatal to a campaign."""


class IssueCategory(Enum):
    NULL_DEREFERENCE = "NullDereference"
    UNDECLARED_IDENTIFIER = "UndeclaredIdentifier"
    UNSAFE_CAST = "UnsafeCast"
    DOUBLE_FREE = "DoubleFree"
    USE_AFTER_FREE = "UseAfterFree"
    SYNTAX_SEMANTIC = "SyntaxSemantic"
    UNINITIALIZED_VARIABLE = "UninitializedVariable"
    EMPTY_PARTIAL = "EmptyPartial"


UNCATEGORIZED = "Uncategorized"


@dataclass
class Diagnostic:
    tool: str  # "analyzer" or "compiler"
    checker_id: str
    message: str
    file: str
    line: int
    severity: str = "warning"  # "error" | "warning"

    def key(self) -> tuple:
        return (self.checker_id, self.file, self.line, self.message)

    def to_dict(self) -> dict:
        return {
            "tool": self.tool,
            "checker_id": self.checker_id,
            "message": self.message,
            "file": self.file,
            "line": self.line,
            "severity": self.severity,
        }


@dataclass
class BuildProfile:
    build_cmd: str
    configure_cmd: str | None = None
    timeout: float = 600.0
    env: dict = field(default_factory=dict)


@dataclass
class AnalyzerProfile:
    sources: list[str] = field(default_factory=lambda: ["*.c"])  # globs relative to workdir
    extra_flags: list[str] = field(default_factory=list)
    timeout: float = 300.0


@dataclass
class CompileOutcome:
    ok: bool
    stderr: str = ""

    def to_dict(self) -> dict:
        return {"ok": self.ok, "stderr": self.stderr[-4096:]}


@dataclass
class VerificationReport:
    compile_outcome: CompileOutcome
    issues: list[tuple[Diagnostic, str]]  # (diagnostic, category name or Uncategorized)
    baseline_issues: list[tuple[Diagnostic, str]]
    issue_delta: dict[str, int]
    analyzer_crashed: bool = False

    def category_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for _, cat in self.issues:
            counts[cat] = counts.get(cat, 0) + 1
        return counts

    def to_dict(self) -> dict:
        return {
            "compile_outcome": self.compile_outcome.to_dict(),
            "issues": [[d.to_dict(), c] for d, c in self.issues],
            "baseline_issues": [[d.to_dict(), c] for d, c in self.baseline_issues],
            "issue_delta": self.issue_delta,
            "analyzer_crashed": self.analyzer_crashed,
        }


# --- rules ----------------------------------------------------------------------


def _load_rules() -> dict:
    with resources.files("patcheval.data").joinpath("analyzer_rules.json").open("rb") as fh:
        return json.load(fh)


_RULES = _load_rules()
_VALID_CATEGORIES = {c.value for c in IssueCategory} | {UNCATEGORIZED}


def enabled_checkers() -> list[str]:
    return list(_RULES["default_checkers"]) + list(_RULES["extra_checkers"])


def categorize(diag: Diagnostic) -> IssueCategory | None:
    """Total, deterministic mapping; None means Uncategorized.

    EmptyPartial is assigned by the pipeline from patch flags, never here.
    """
    message = diag.message.lower()
    if diag.tool == "analyzer" or diag.checker_id not in ("", "frontend"):
        for rule in _RULES["message_rules"]:
            if rule["checker"] == diag.checker_id and rule["contains"].lower() in message:
                return _as_category(rule["category"])
        for pattern, category in _RULES["checker_map"].items():
            if pattern.endswith("*"):
                if diag.checker_id.startswith(pattern[:-1]):
                    return _as_category(category)
            elif diag.checker_id == pattern:
                return _as_category(category)
    if diag.tool == "compiler" or diag.checker_id in ("", "frontend"):
        for rule in _RULES["frontend_rules"]:
            if rule["contains"].lower() in message:
                return _as_category(rule["category"])
        if diag.severity == "error":
            return IssueCategory.SYNTAX_SEMANTIC
    return None


def _as_category(name: str) -> IssueCategory | None:
    if name == UNCATEGORIZED:
        return None
    return IssueCategory(name)


def category_name(category: IssueCategory | None) -> str:
    return category.value if category is not None else UNCATEGORIZED


# --- building --------------------------------------------------------------------


def _run_cmd(cmd: str, workdir: Path, timeout: float, env: dict) -> subprocess.CompletedProcess:
    argv = shlex.split(cmd)
    if not argv:
        raise BuildToolMissing("empty build command")
    if shutil.which(argv[0]) is None and not (workdir / argv[0]).exists():
        raise BuildToolMissing(f"build tool {argv[0]!r} not found")
    import os

    merged = dict(os.environ)
    merged.update(env)
    try:
        return subprocess.run(
            argv, cwd=workdir, capture_output=True, text=True, timeout=timeout, env=merged
        )
    except subprocess.TimeoutExpired as exc:
        raise BuildTimeout(f"build exceeded {timeout}s: {cmd}") from exc


def build_tree(workdir: str | Path, profile: BuildProfile) -> CompileOutcome:
    """Run the project's build; success iff exit status 0."""
    workdir = Path(workdir)
    if profile.configure_cmd:
        conf = _run_cmd(profile.configure_cmd, workdir, profile.timeout, profile.env)
        if conf.returncode != 0:
            return CompileOutcome(False, conf.stderr)
    proc = _run_cmd(profile.build_cmd, workdir, profile.timeout, profile.env)
    return CompileOutcome(proc.returncode == 0, proc.stderr)


_COMPILER_DIAG_RE = re.compile(
    r"^(?P<file>[^\s:]+):(?P<line>\d+):(?:\d+:)?\s+(?P<sev>error|warning):\s+(?P<msg>.*)$"
)


def parse_compiler_diagnostics(stderr: str) -> list[Diagnostic]:
    """file:line:col: error: message lines from cc/clang stderr."""
    out: list[Diagnostic] = []
    for raw in stderr.splitlines():
        m = _COMPILER_DIAG_RE.match(raw.strip())
        if not m:
            continue
        out.append(
            Diagnostic(
                tool="compiler",
                checker_id="frontend",
                message=m.group("msg").strip(),
                file=m.group("file"),
                line=int(m.group("line")),
                severity=m.group("sev"),
            )
        )
    return out


# --- analyzing -------------------------------------------------------------------


def analyze_tree(workdir: str | Path, profile: AnalyzerProfile) -> list[Diagnostic]:
    """Run the analyzer per translation unit; plist output, deduplicated."""
    workdir = Path(workdir)
    binary = _RULES["analyzer_binary"]
    if shutil.which(binary) is None:
        raise AnalyzerMissing(f"{binary!r} not on PATH")
    sources: list[Path] = []
    for pattern in profile.sources:
        sources.extend(sorted(workdir / p for p in glob.glob(pattern, root_dir=workdir)))
    diagnostics: list[Diagnostic] = []
    seen: set[tuple] = set()
    crashed = False
    for src in sources:
        with tempfile.NamedTemporaryFile(suffix=".plist", delete=False) as tmp:
            plist_path = Path(tmp.name)
        try:
            argv = [
                binary,
                "--analyze",
                "-Xclang",
                "-analyzer-output=plist",
                "-o",
                str(plist_path),
            ]
            for checker in _RULES["extra_checkers"]:
                argv += ["-Xclang", f"-analyzer-checker={checker}"]
            argv += profile.extra_flags
            argv.append(str(src.relative_to(workdir)))
            try:
                proc = subprocess.run(
                    argv, cwd=workdir, capture_output=True, text=True, timeout=profile.timeout
                )
            except subprocess.TimeoutExpired as exc:
                raise AnalyzerCrash(f"analyzer timed out on {src.name}") from exc
            try:
                with open(plist_path, "rb") as fh:
                    data = plistlib.load(fh)
            except Exception:
                if proc.returncode != 0:
                    crashed = True
                continue
            for entry in data.get("diagnostics", []):
                diag = Diagnostic(
                    tool="analyzer",
                    checker_id=entry.get("check_name", ""),
                    message=entry.get("description", ""),
                    file=src.name,
                    line=int(entry.get("location", {}).get("line", 1)),
                    severity="warning",
                )
                if diag.key() not in seen:
                    seen.add(diag.key())
                    diagnostics.append(diag)
        finally:
            plist_path.unlink(missing_ok=True)
    if crashed and not diagnostics:
        raise AnalyzerCrash("analyzer produced no usable output")
    return diagnostics


# --- verification ------------------------------------------------------------------


class BaselineCache:
    """verify() results for human trees, shared across providers.

    Computation is serialized per key so concurrent workers never build the
    same baseline tree twice (or against each other).
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self._data: dict[str, tuple[CompileOutcome, list[tuple[Diagnostic, str]]]] = {}

    def get_or_compute(self, key: str, compute):
        with self._lock:
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            with self._lock:
                if key in self._data:
                    return self._data[key]
            value = compute()
            with self._lock:
                self._data[key] = value
                return value


def _categorized(diags: list[Diagnostic]) -> list[tuple[Diagnostic, str]]:
    return [(d, category_name(categorize(d))) for d in diags]


def verify(
    workdir_candidate: str | Path,
    workdir_baseline: str | Path,
    build_profile: BuildProfile,
    analyzer_profile: AnalyzerProfile,
    baseline_cache: BaselineCache | None = None,
    baseline_key: str | None = None,
) -> VerificationReport:
    """Static verification of the candidate tree against the human baseline.

    Candidate compile failure keeps the front-end diagnostics and skips the
    analyzer (uncompilable code vacuously yields no analysis findings).
    """

    def compute_baseline():
        outcome = build_tree(workdir_baseline, build_profile)
        if outcome.ok:
            issues = _categorized(analyze_tree(workdir_baseline, analyzer_profile))
        else:
            issues = _categorized(parse_compiler_diagnostics(outcome.stderr))
        return outcome, issues

    if baseline_cache is not None and baseline_key is not None:
        _, baseline_issues = baseline_cache.get_or_compute(baseline_key, compute_baseline)
    else:
        _, baseline_issues = compute_baseline()

    crashed = False
    outcome = build_tree(workdir_candidate, build_profile)
    if outcome.ok:
        try:
            candidate_issues = _categorized(analyze_tree(workdir_candidate, analyzer_profile))
        except AnalyzerCrash:
            candidate_issues = []
            crashed = True
    else:
        errors = [d for d in parse_compiler_diagnostics(outcome.stderr) if d.severity == "error"]
        candidate_issues = _categorized(errors)

    delta: dict[str, int] = {}
    for _, cat in candidate_issues:
        delta[cat] = delta.get(cat, 0) + 1
    for _, cat in baseline_issues:
        delta[cat] = delta.get(cat, 0) - 1
    delta = {k: v for k, v in delta.items() if v != 0}

    return VerificationReport(
        compile_outcome=outcome,
        issues=candidate_issues,
        baseline_issues=baseline_issues,
        issue_delta=delta,
        analyzer_crashed=crashed,
    )


def validate_rules() -> list[str]:
    """Config sanity: every mapped category must be an allowed name."""
    problems = []
    for rule in _RULES["message_rules"] + _RULES["frontend_rules"]:
        if rule["category"] not in _VALID_CATEGORIES:
            problems.append(f"bad category {rule['category']!r}")
    for pattern, category in _RULES["checker_map"].items():
        if category not in _VALID_CATEGORIES:
            problems.append(f"bad category {category!r} for {pattern!r}")
    return problems
