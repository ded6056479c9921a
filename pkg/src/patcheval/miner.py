"""Mining single-file, single-function commits out of a git history."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from pathlib import Path

from . import diffs, splicer, vcs
from .errors import PatchEvalError


class MinerError(PatchEvalError):
    pass


class RepoUnreadable(MinerError):
    pass


class HistoryEmpty(MinerError):
    """Raised by callers when a whole mining run produced nothing; see ledger."""


class ParentMissing(MinerError):
    pass


class FunctionNotLocatable(MinerError):
    pass


class CommitKind(Enum):
    BUG_FIX = "bug-fix"
    FEATURE_ENHANCEMENT = "feature-enhancement"


@dataclass
class SelectionCriteria:
    max_patch_loc: int = 66
    max_files_changed: int = 1
    max_functions_changed: int = 1
    min_message_tokens: int = 4
    allowed_kinds: set[CommitKind] = field(
        default_factory=lambda: {CommitKind.BUG_FIX, CommitKind.FEATURE_ENHANCEMENT}
    )
    date_range: tuple[date, date] | None = None
    extensions: tuple[str, ...] = (".c",)  # headers excluded by default

    def __post_init__(self):
        if self.max_patch_loc <= 0:
            raise ValueError("max_patch_loc must be positive")


@dataclass
class CandidateCommit:
    commit_id: str
    author_date: date
    message: str
    files_changed: list[str]
    diff: str


class ChangeKind(Enum):
    SINGLE_FUNCTION_EDIT = "single-function-edit"
    NEW_FUNCTION = "new-function"
    OTHER = "other"


@dataclass
class ChangeShape:
    kind: ChangeKind
    function_name: str | None = None


@dataclass
class MessageQuality:
    well_formed: bool
    reasons: list[str] = field(default_factory=list)


@dataclass
class CommitTask:
    task_id: str
    project: str
    commit_id: str
    kind: CommitKind
    message: str
    context_file_path: str
    context_file_pre: str
    function_name: str
    function_span_pre: tuple[int, int] | None  # absent for feature enhancements
    human_function_post: str
    file_loc: int
    function_loc: int
    patch_loc: int
    author_date: date
    message_quality: MessageQuality | None = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "project": self.project,
            "commit_id": self.commit_id,
            "kind": self.kind.value,
            "message": self.message,
            "context_file_path": self.context_file_path,
            "context_file_pre": self.context_file_pre,
            "function_name": self.function_name,
            "function_span_pre": list(self.function_span_pre) if self.function_span_pre else None,
            "human_function_post": self.human_function_post,
            "file_loc": self.file_loc,
            "function_loc": self.function_loc,
            "patch_loc": self.patch_loc,
            "author_date": self.author_date.isoformat(),
            "message_quality": (
                {"well_formed": self.message_quality.well_formed, "reasons": self.message_quality.reasons}
                if self.message_quality
                else None
            ),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CommitTask":
        mq = d.get("message_quality")
        return cls(
            task_id=d["task_id"],
            project=d["project"],
            commit_id=d["commit_id"],
            kind=CommitKind(d["kind"]),
            message=d["message"],
            context_file_path=d["context_file_path"],
            context_file_pre=d["context_file_pre"],
            function_name=d["function_name"],
            function_span_pre=tuple(d["function_span_pre"]) if d.get("function_span_pre") else None,
            human_function_post=d["human_function_post"],
            file_loc=d["file_loc"],
            function_loc=d["function_loc"],
            patch_loc=d["patch_loc"],
            author_date=date.fromisoformat(d["author_date"]),
            message_quality=MessageQuality(mq["well_formed"], mq["reasons"]) if mq else None,
        )


def _count_lines(text: str) -> int:
    return len(text.splitlines())


# --- history scanning ---------------------------------------------------------


def scan_history(repo_path: str | Path, criteria: SelectionCriteria) -> list[CandidateCommit]:
    """Candidate commits touching exactly one C file, newest first.

    Merge commits are skipped (diff ambiguity against two parents). A repo
    with no commits yields an empty list.
    """
    repo = Path(repo_path)
    if not vcs.is_repository(repo):
        raise RepoUnreadable(f"not a readable git working copy: {repo}")
    try:
        raw = vcs.run_git(repo, "rev-list", "--no-merges", "--date-order", "HEAD")
    except vcs.GitError:
        return []  # unborn HEAD: vacuous history
    candidates: list[CandidateCommit] = []
    for sha in raw.split():
        meta = vcs.run_git(repo, "show", "-s", "--format=%aI%x00%B", sha)
        date_iso, _, message = meta.partition("\x00")
        author_date = datetime.fromisoformat(date_iso.strip()).date()
        if criteria.date_range is not None:
            lo, hi = criteria.date_range
            if not (lo <= author_date <= hi):
                continue
        files = vcs.run_git(repo, "diff-tree", "--no-commit-id", "--name-only", "-r", sha).split()
        if len(files) != criteria.max_files_changed:
            continue
        if not any(files[0].endswith(ext) for ext in criteria.extensions):
            continue
        parents = vcs.run_git(repo, "rev-list", "--parents", "-n", "1", sha).split()
        if len(parents) < 2:
            continue  # root commit: no pre-image to mine
        diff = vcs.run_git(repo, "diff", f"{sha}^", sha, "--", files[0])
        candidates.append(
            CandidateCommit(
                commit_id=sha,
                author_date=author_date,
                message=message.strip("\n"),
                files_changed=files,
                diff=diff,
            )
        )
    return candidates


# --- change classification ------------------------------------------------------


def classify_change(diff: str, pre_file: str) -> ChangeShape:
    """Single-function edit, pure new-function addition, or other."""
    hunks = diffs.parse_unified(diff)
    if not hunks or all(h.added + h.removed == 0 for h in hunks):
        return ChangeShape(ChangeKind.OTHER)
    try:
        post_file = diffs.apply_unified(pre_file, diff)
    except diffs.DiffDoesNotApply:
        raise
    try:
        pre_spans = splicer.scan_functions(pre_file)
    except splicer.SplicerError:
        return ChangeShape(ChangeKind.OTHER)

    intervals = diffs.pre_image_intervals(diff)

    # Single-function edit: every affected pre interval inside one span.
    # Insertions anchored after a span's closing brace are outside it.
    owners: set[str] = set()
    all_inside = True
    for lo, hi, kind in intervals:
        owner = None
        for span in pre_spans:
            if kind == "insert":
                if span.start_line <= lo < span.end_line:
                    owner = span.name
                    break
            elif span.start_line <= lo and hi <= span.end_line:
                owner = span.name
                break
        if owner is None:
            all_inside = False
            break
        owners.add(owner)
    if all_inside and len(owners) == 1:
        return ChangeShape(ChangeKind.SINGLE_FUNCTION_EDIT, owners.pop())

    # New function: additions only, exactly one new top-level definition,
    # and the existing definitions' text unchanged.
    if all(h.removed == 0 for h in hunks):
        try:
            post_spans = splicer.scan_functions(post_file)
        except splicer.SplicerError:
            return ChangeShape(ChangeKind.OTHER)
        pre_names = {s.name for s in pre_spans}
        new_names = [s.name for s in post_spans if s.name not in pre_names]
        if len(new_names) == 1:
            unchanged = all(
                splicer.extract_span(pre_file, s)
                == splicer.extract_span(post_file, splicer.locate_function(post_file, s.name))
                for s in pre_spans
            )
            if unchanged:
                return ChangeShape(ChangeKind.NEW_FUNCTION, new_names[0])
    return ChangeShape(ChangeKind.OTHER)


# --- message quality -------------------------------------------------------------

_URL_RE = re.compile(r"^\s*(https?://\S+|www\.\S+)\s*$", re.IGNORECASE)
_ISSUE_REF_RE = re.compile(r"^\s*(#\d+|[A-Z]+-\d+|(fixes|closes|refs?)\s*[:#]?\s*#?\d+)\s*$", re.IGNORECASE)
_BOILERPLATE_RE = re.compile(
    r"^\s*(merge (branch|pull request|remote)|revert \"|this reverts commit)\b", re.IGNORECASE
)


def assess_message(message: str, min_message_tokens: int = 4) -> MessageQuality:
    """Heuristic screen for messages that carry the what and the why."""
    reasons: list[str] = []
    stripped = message.strip()
    if not stripped:
        return MessageQuality(False, ["empty"])
    first_line = stripped.splitlines()[0]
    if _URL_RE.match(stripped):
        reasons.append("url-only")
    if _ISSUE_REF_RE.match(stripped):
        reasons.append("issue-ref-only")
    if _BOILERPLATE_RE.match(first_line):
        reasons.append("merge-or-revert-boilerplate")
    if len(stripped.split()) < min_message_tokens:
        reasons.append("too-short")
    return MessageQuality(not reasons, reasons)


# --- task materialization ----------------------------------------------------------


def materialize_task(
    repo_path: str | Path,
    commit: CandidateCommit,
    project: str,
    criteria: SelectionCriteria | None = None,
) -> CommitTask:
    """Build the evaluation unit for a classified commit.

    Preconditions: classify_change returned SingleFunctionEdit or NewFunction
    for this commit's diff; violations raise FunctionNotLocatable.
    """
    criteria = criteria or SelectionCriteria()
    repo = Path(repo_path)
    parents = vcs.run_git(repo, "rev-list", "--parents", "-n", "1", commit.commit_id).split()
    if len(parents) < 2:
        raise ParentMissing(f"commit {commit.commit_id[:10]} has no parent")
    parent = parents[1]
    path = commit.files_changed[0]
    pre_text = vcs.file_at_revision(repo, parent, path)
    post_text = vcs.file_at_revision(repo, commit.commit_id, path)

    shape = classify_change(commit.diff, pre_text)
    if shape.kind is ChangeKind.OTHER or shape.function_name is None:
        raise FunctionNotLocatable(
            f"commit {commit.commit_id[:10]} is not a single-function change"
        )
    name = shape.function_name
    try:
        post_span = splicer.locate_function(post_text, name)
    except splicer.SplicerError as exc:
        raise FunctionNotLocatable(f"{name!r} not locatable in post image: {exc}") from exc
    human_post = splicer.extract_span(post_text, post_span)

    if shape.kind is ChangeKind.SINGLE_FUNCTION_EDIT:
        kind = CommitKind.BUG_FIX
        try:
            pre_span = splicer.locate_function(pre_text, name)
        except splicer.SplicerError as exc:
            raise FunctionNotLocatable(f"{name!r} not locatable in pre image: {exc}") from exc
        span_tuple = (pre_span.start_line, pre_span.end_line)
        function_loc = pre_span.end_line - pre_span.start_line + 1
    else:
        kind = CommitKind.FEATURE_ENHANCEMENT
        span_tuple = None
        function_loc = _count_lines(human_post)

    return CommitTask(
        task_id=f"{project}-{commit.commit_id[:10]}",
        project=project,
        commit_id=commit.commit_id,
        kind=kind,
        message=commit.message,
        context_file_path=path,
        context_file_pre=pre_text,
        function_name=name,
        function_span_pre=span_tuple,
        human_function_post=human_post,
        file_loc=_count_lines(pre_text),
        function_loc=function_loc,
        patch_loc=diffs.changed_line_count(commit.diff),
        author_date=commit.author_date,
        message_quality=assess_message(commit.message, criteria.min_message_tokens),
    )


def mine_repository(
    repo_path: str | Path, project: str, criteria: SelectionCriteria
) -> list[CommitTask]:
    """scan + classify + materialize, applying all selection criteria.

    Suspect-message tasks are kept (flagged) so the operator can curate.
    """
    tasks: list[CommitTask] = []
    for commit in scan_history(repo_path, criteria):
        if diffs.changed_line_count(commit.diff) > criteria.max_patch_loc:
            continue
        try:
            pre_text = vcs.file_at_revision(repo_path, f"{commit.commit_id}^", commit.files_changed[0])
        except vcs.GitError:
            continue  # file added by this commit; no pre-image to patch
        try:
            shape = classify_change(commit.diff, pre_text)
        except diffs.DiffDoesNotApply:
            continue
        if shape.kind is ChangeKind.OTHER:
            continue
        kind = (
            CommitKind.BUG_FIX
            if shape.kind is ChangeKind.SINGLE_FUNCTION_EDIT
            else CommitKind.FEATURE_ENHANCEMENT
        )
        if kind not in criteria.allowed_kinds:
            continue
        try:
            tasks.append(materialize_task(repo_path, commit, project, criteria))
        except MinerError:
            continue
    return tasks
