"""Two-reviewer triage: verdict log, suggestions, agreement, HTTP service.

Verdicts live in an append-only log with tombstoned corrections; replaying
the log reconstructs identical state. The service is a stdlib HTTP server
speaking JSON, with an optional shared bearer token.
"""

from __future__ import annotations

import fcntl
import json
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import diffs
from .errors import PatchEvalError
from .store import RunStore


class TriageError(PatchEvalError):
    pass


class Conflict(TriageError):
    pass


class UnknownTask(TriageError):
    pass


class CampaignSealed(TriageError):
    pass


class DisputesOpen(TriageError):
    pass


class AddressInUse(TriageError):
    pass


class StoreLocked(TriageError):
    pass


class VerdictCategory(Enum):
    IDENTICAL_TO_HUMAN = "IdenticalToHuman"
    DIFFERENT_APPEARS_CORRECT = "DifferentAppearsCorrect"
    PARTIAL_FIX = "PartialFix"
    EMPTY_PATCH = "EmptyPatch"
    WRONG_SOLUTION = "WrongSolution"
    DELETED_UNRELATED_CODE = "DeletedUnrelatedCode"
    UNCOMPILABLE_UNDECLARED = "UncompilableUndeclared"


CORRECT_CATEGORIES = {VerdictCategory.IDENTICAL_TO_HUMAN, VerdictCategory.DIFFERENT_APPEARS_CORRECT}

# Categories only a human reviewer may assign; suggestions never emit these.
HUMAN_ONLY_CATEGORIES = {
    VerdictCategory.DIFFERENT_APPEARS_CORRECT,
    VerdictCategory.PARTIAL_FIX,
    VerdictCategory.WRONG_SOLUTION,
}


def is_correct(category: VerdictCategory) -> bool:
    return category in CORRECT_CATEGORIES


@dataclass
class TriageVerdict:
    task_id: str
    provider_id: str
    reviewer_id: str
    category: VerdictCategory
    notes: str = ""
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "provider_id": self.provider_id,
            "reviewer_id": self.reviewer_id,
            "category": self.category.value,
            "notes": self.notes,
            "timestamp": self.timestamp,
        }


@dataclass
class AgreementStats:
    n_double_reviewed: int
    n_agree: int
    raw_agreement: float | None
    per_category_confusion: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_double_reviewed": self.n_double_reviewed,
            "n_agree": self.n_agree,
            "raw_agreement": self.raw_agreement,
            "per_category_confusion": self.per_category_confusion,
        }


# --- verdict store --------------------------------------------------------------


class TriageStore:
    """Verdict operations over a RunStore, guarded for check-then-append races."""

    def __init__(self, store: RunStore):
        self.store = store
        self._write_lock = threading.Lock()

    def verdicts(self) -> dict[tuple[str, str], dict[str, TriageVerdict]]:
        """Replay of the log: (task, provider) -> reviewer -> verdict."""
        state: dict[tuple[str, str], dict[str, TriageVerdict]] = {}
        for op in self.store.verdict_ops():
            key = (op["task_id"], op["provider_id"])
            if op["op"] == "add":
                state.setdefault(key, {})[op["reviewer_id"]] = TriageVerdict(
                    task_id=op["task_id"],
                    provider_id=op["provider_id"],
                    reviewer_id=op["reviewer_id"],
                    category=VerdictCategory(op["category"]),
                    notes=op.get("notes", ""),
                    timestamp=op.get("timestamp", ""),
                )
            elif op["op"] == "retract":
                state.get(key, {}).pop(op["reviewer_id"], None)
        return state

    def record_verdict(self, verdict: TriageVerdict) -> str:
        if self.store.campaign_state().get("sealed"):
            raise CampaignSealed("campaign is sealed; verdicts are immutable")
        known = self.store.completed_keys()
        key = RunStore.record_key(verdict.task_id, verdict.provider_id)
        if key not in known:
            raise UnknownTask(f"no evaluation record {key!r}")
        with self._write_lock:
            existing = self.verdicts().get((verdict.task_id, verdict.provider_id), {})
            if verdict.reviewer_id in existing:
                raise Conflict(
                    f"reviewer {verdict.reviewer_id!r} already judged {key!r} as "
                    f"{existing[verdict.reviewer_id].category.value}"
                )
            op = verdict.to_dict()
            op["op"] = "add"
            if not op["timestamp"]:
                op["timestamp"] = datetime.now(timezone.utc).isoformat()
            self.store.append_verdict_op(op)
        return key

    def retract_verdict(self, task_id: str, provider_id: str, reviewer_id: str) -> None:
        """Tombstone a verdict (corrections happen as retract + add)."""
        if self.store.campaign_state().get("sealed"):
            raise CampaignSealed("campaign is sealed; verdicts are immutable")
        with self._write_lock:
            self.store.append_verdict_op(
                {
                    "op": "retract",
                    "task_id": task_id,
                    "provider_id": provider_id,
                    "reviewer_id": reviewer_id,
                    "timestamp": datetime.now(timezone.utc).isoformat(),
                }
            )

    def status_of(self, reviewers: dict[str, TriageVerdict]) -> str:
        if len(reviewers) < 2:
            return "pending"
        categories = {v.category for v in reviewers.values()}
        return "reviewed" if len(categories) == 1 else "disputed"

    def disputed_keys(self) -> list[tuple[str, str]]:
        return [k for k, revs in self.verdicts().items() if self.status_of(revs) == "disputed"]

    def agreement(self) -> AgreementStats:
        """Exact-category agreement over pairs with exactly two verdicts."""
        names = [c.value for c in VerdictCategory]
        confusion = {row: {col: 0 for col in names} for row in names}
        n_double = 0
        n_agree = 0
        for _, reviewers in sorted(self.verdicts().items()):
            if len(reviewers) != 2:
                continue
            n_double += 1
            first, second = (reviewers[r] for r in sorted(reviewers))
            confusion[first.category.value][second.category.value] += 1
            if first.category is second.category:
                n_agree += 1
        ratio = n_agree / n_double if n_double else None
        return AgreementStats(n_double, n_agree, ratio, confusion)

    def seal(self, override_disputes: bool = False) -> dict:
        state = self.store.campaign_state()
        if state.get("sealed"):
            return state
        disputed = self.disputed_keys()
        if disputed and not override_disputes:
            raise DisputesOpen(
                f"{len(disputed)} disputed record(s); resolve or seal with override"
            )
        state = {
            "sealed": True,
            "sealed_at": datetime.now(timezone.utc).isoformat(),
            "overrode_disputes": bool(disputed),
        }
        self.store.write_campaign_state(state)
        return state


# --- suggestion ------------------------------------------------------------------


def _whitespace_normal(text: str) -> str:
    return " ".join(text.split())


def suggest_category(record: dict) -> VerdictCategory | None:
    """Pre-fill for the review UI; the reviewer stays authoritative.

    Never returns a human-judgment-only category.
    """
    patch = record.get("patch") or {}
    task = record.get("task") or {}
    candidate_fn = record.get("candidate_function") or ""
    human_fn = task.get("human_function_post") or ""

    if candidate_fn and human_fn and _whitespace_normal(candidate_fn) == _whitespace_normal(human_fn):
        return VerdictCategory.IDENTICAL_TO_HUMAN
    if patch.get("is_empty"):
        return VerdictCategory.EMPTY_PATCH

    verification = record.get("verification")
    if isinstance(verification, dict) and not verification.get("skipped"):
        compile_ok = verification.get("compile_outcome", {}).get("ok", True)
        if not compile_ok:
            counts: dict[str, int] = {}
            for _, cat in verification.get("issues", []):
                counts[cat] = counts.get(cat, 0) + 1
            if counts.get("UndeclaredIdentifier", 0) >= 1:
                return VerdictCategory.UNCOMPILABLE_UNDECLARED

    delta = record.get("structure_delta")
    if record.get("splice_mode") == "whole-file-adopt" and isinstance(delta, dict):
        target = task.get("function_name")
        deleted = [f for f in delta.get("deleted_functions", []) if f != target]
        if deleted:
            return VerdictCategory.DELETED_UNRELATED_CODE
    return None


# --- record views -------------------------------------------------------------------


def _context_excerpt(text: str, limit: int = 40) -> str:
    lines = text.splitlines()
    if len(lines) <= limit:
        return text
    return "\n".join(lines[:limit]) + f"\n… ({len(lines) - limit} more lines)"


def record_summary(record: dict, reviewers: dict[str, TriageVerdict]) -> dict:
    task = record["task"]
    return {
        "id": RunStore.record_key(task["task_id"], record["provider_id"]),
        "task_id": task["task_id"],
        "provider_id": record["provider_id"],
        "project": task["project"],
        "kind": task["kind"],
        "function_name": task["function_name"],
        "suggestion": record.get("suggestion"),
        "n_verdicts": len(reviewers),
        "created_at": record.get("created_at", ""),
    }


def record_detail(record: dict, reviewers: dict[str, TriageVerdict]) -> dict:
    task = record["task"]
    pre_fn = _pre_function(task)
    human_diff = diffs.make_unified(pre_fn, task["human_function_post"], task["function_name"])
    candidate_fn = record.get("candidate_function") or ""
    llm_diff = diffs.make_unified(pre_fn, candidate_fn, task["function_name"]) if candidate_fn else ""
    verification = record.get("verification")
    verification_summary = None
    if isinstance(verification, dict) and not verification.get("skipped"):
        counts: dict[str, int] = {}
        for _, cat in verification.get("issues", []):
            counts[cat] = counts.get(cat, 0) + 1
        verification_summary = {
            "compile_ok": verification.get("compile_outcome", {}).get("ok"),
            "issue_counts": counts,
            "issue_delta": verification.get("issue_delta", {}),
        }
    elif isinstance(verification, dict):
        verification_summary = {"skipped": verification.get("reason", "skipped")}

    validation = record.get("validation")
    test_outcome = None
    if isinstance(validation, dict):
        test_outcome = validation.get("status") or {"skipped": validation.get("reason", "skipped")}

    summary = record_summary(record, reviewers)
    summary.update(
        {
            "prompt": record.get("prompt", {}).get("text", ""),
            "message": task["message"],
            "context_excerpt": _context_excerpt(task["context_file_pre"]),
            "human_diff": human_diff,
            "llm_diff": llm_diff,
            "verification_summary": verification_summary,
            "test_outcome": test_outcome,
            "citations": (record.get("patch") or {}).get("stripped_citations", []),
            "machine_flags": record.get("machine_flags", {}),
            "verdicts": [v.to_dict() for _, v in sorted(reviewers.items())],
        }
    )
    return summary


def _pre_function(task: dict) -> str:
    span = task.get("function_span_pre")
    if not span:
        return ""
    lines = task["context_file_pre"].splitlines(keepends=True)
    return "".join(lines[span[0] - 1 : span[1]])


# --- HTTP service ----------------------------------------------------------------------

_TASK_PATH_RE = re.compile(r"^/tasks/([^/]+)(/verdicts)?$")


class TriageService:
    def __init__(
        self,
        store: RunStore,
        bind: str = "127.0.0.1:8787",
        token: str | None = None,
        static_dir: str | Path | None = None,
    ):
        self.store = store
        self.triage = TriageStore(store)
        self.token = token
        self.static_dir = Path(static_dir) if static_dir else None
        host, _, port = bind.partition(":")
        self._lock_handle = self._acquire_lock()
        try:
            self.httpd = ThreadingHTTPServer((host, int(port or 0)), self._make_handler())
        except OSError as exc:
            self._release_lock()
            if exc.errno == 98:  # EADDRINUSE
                raise AddressInUse(f"cannot bind {bind}: address in use") from exc
            raise
        self._thread: threading.Thread | None = None

    def _acquire_lock(self):
        lock_path = self.store.path / ".triage.lock"
        handle = open(lock_path, "w")
        try:
            fcntl.flock(handle, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as exc:
            handle.close()
            raise StoreLocked(f"another triage service holds {lock_path}") from exc
        return handle

    def _release_lock(self):
        if self._lock_handle:
            fcntl.flock(self._lock_handle, fcntl.LOCK_UN)
            self._lock_handle.close()
            self._lock_handle = None

    @property
    def address(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "TriageService":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        try:
            self.httpd.serve_forever()
        finally:
            self.shutdown()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        self._release_lock()

    # --- request handling ------------------------------------------------

    def _make_handler(self):
        service = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def _send(self, code: int, payload: dict | list | bytes, content_type="application/json"):
                body = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
                self.end_headers()
                self.wfile.write(body)

            def _authorized(self) -> bool:
                if service.token is None:
                    return True
                header = self.headers.get("Authorization", "")
                return header == f"Bearer {service.token}"

            def do_OPTIONS(self):
                self._send(204, b"", content_type="text/plain")

            def do_GET(self):
                if not self._authorized():
                    return self._send(401, {"error": "unauthorized"})
                url = urlparse(self.path)
                if url.path == "/tasks":
                    return self._list_tasks(url)
                m = _TASK_PATH_RE.match(url.path)
                if m and not m.group(2):
                    return self._task_detail(m.group(1))
                if url.path == "/agreement":
                    return self._send(200, service.triage.agreement().to_dict())
                if url.path == "/campaign":
                    return self._send(200, service.store.campaign_state())
                if service.static_dir is not None:
                    return self._static(url.path)
                return self._send(404, {"error": "not found"})

            def do_POST(self):
                if not self._authorized():
                    return self._send(401, {"error": "unauthorized"})
                url = urlparse(self.path)
                length = int(self.headers.get("Content-Length") or 0)
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    return self._send(400, {"error": "invalid JSON body"})
                m = _TASK_PATH_RE.match(url.path)
                if m and m.group(2):
                    return self._post_verdict(m.group(1), body)
                if url.path == "/campaign/seal":
                    return self._seal(body)
                return self._send(404, {"error": "not found"})

            # --- endpoints ------------------------------------------------

            def _records_with_verdicts(self):
                verdicts = service.triage.verdicts()
                for record in service.store.records():
                    key = (record["task"]["task_id"], record["provider_id"])
                    yield record, verdicts.get(key, {})

            def _list_tasks(self, url):
                params = parse_qs(url.query)
                wanted = params.get("status", [None])[0]
                offset = int(params.get("offset", ["0"])[0])
                limit = int(params.get("limit", ["100"])[0])
                items = []
                for record, reviewers in self._records_with_verdicts():
                    status = service.triage.status_of(reviewers)
                    if wanted and status != wanted:
                        continue
                    summary = record_summary(record, reviewers)
                    summary["status"] = status
                    items.append(summary)
                items.sort(key=lambda r: (r["created_at"], r["id"]))  # oldest first
                page = items[offset : offset + limit]
                return self._send(200, {"items": page, "total": len(items)})

            def _task_detail(self, key: str):
                for record, reviewers in self._records_with_verdicts():
                    if RunStore.record_key(record["task"]["task_id"], record["provider_id"]) == key:
                        detail = record_detail(record, reviewers)
                        detail["status"] = service.triage.status_of(reviewers)
                        detail["sealed"] = service.store.campaign_state().get("sealed", False)
                        return self._send(200, detail)
                return self._send(404, {"error": f"no record {key!r}"})

            def _post_verdict(self, key: str, body: dict):
                task_id, sep, provider_id = key.rpartition("--")
                if not sep:
                    return self._send(400, {"error": "bad record id"})
                try:
                    category = VerdictCategory(body["category"])
                except (KeyError, ValueError):
                    valid = [c.value for c in VerdictCategory]
                    return self._send(400, {"error": f"category must be one of {valid}"})
                reviewer = str(body.get("reviewer_id", "")).strip()
                if not reviewer:
                    return self._send(400, {"error": "reviewer_id required"})
                verdict = TriageVerdict(
                    task_id=task_id,
                    provider_id=provider_id,
                    reviewer_id=reviewer,
                    category=category,
                    notes=str(body.get("notes", "")),
                )
                try:
                    service.triage.record_verdict(verdict)
                except Conflict as exc:
                    existing = service.triage.verdicts().get((task_id, provider_id), {})
                    return self._send(
                        409,
                        {
                            "error": str(exc),
                            "existing": existing[reviewer].to_dict() if reviewer in existing else None,
                        },
                    )
                except UnknownTask as exc:
                    return self._send(404, {"error": str(exc)})
                except CampaignSealed as exc:
                    return self._send(423, {"error": str(exc)})
                return self._send(201, {"stored": verdict.to_dict()})

            def _seal(self, body: dict):
                try:
                    state = service.triage.seal(override_disputes=bool(body.get("override")))
                except DisputesOpen as exc:
                    return self._send(409, {"error": str(exc)})
                return self._send(200, state)

            def _static(self, path: str):
                rel = "index.html" if path == "/" else path.lstrip("/")
                target = (service.static_dir / rel).resolve()
                if not str(target).startswith(str(service.static_dir.resolve())) or not target.is_file():
                    return self._send(404, {"error": "not found"})
                ctype = {
                    ".html": "text/html",
                    ".js": "text/javascript",
                    ".css": "text/css",
                    ".json": "application/json",
                }.get(target.suffix, "application/octet-stream")
                self._send(200, target.read_bytes(), content_type=ctype)

        return Handler


def serve(
    bind_address: str,
    store: RunStore,
    token: str | None = None,
    static_dir: str | Path | None = None,
) -> TriageService:
    """Open the store, bind, and return a started service handle."""
    return TriageService(store, bind_address, token, static_dir).start()
