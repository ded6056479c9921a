"""Append-only run store: evaluation records, verdicts, raw responses.

One JSON object per line, schema-versioned. Appends are crash-safe (flush +
fsync) and funneled through a single lock; the canonical hash excludes
volatile fields so two replays of the same campaign compare byte-equal.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

from .errors import PatchEvalError

SCHEMA_VERSION = 1

VOLATILE_FIELDS = {"created_at", "latency", "duration", "workdir", "sealed_at", "timestamp"}


class StoreCorrupt(PatchEvalError):
    pass


class StoreLocked(PatchEvalError):
    pass


def _strip_volatile(value):
    if isinstance(value, dict):
        return {k: _strip_volatile(v) for k, v in sorted(value.items()) if k not in VOLATILE_FIELDS}
    if isinstance(value, list):
        return [_strip_volatile(v) for v in value]
    return value


class RunStore:
    """Filesystem layout:

    records.jsonl   one EvaluationRecord per line (append-only)
    tasks.jsonl     mined/imported CommitTasks
    verdicts.jsonl  triage ops: {"op": "add"|"retract", ...}
    raw/<key>.txt   raw provider responses, pre-parse
    campaign.json   seal state
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / "raw").mkdir(exist_ok=True)
        self._append_lock = threading.Lock()
        for name in ("records.jsonl", "tasks.jsonl", "verdicts.jsonl"):
            self._repair_torn_tail(name)

    def _repair_torn_tail(self, filename: str) -> None:
        """Drop a half-written final line left behind by a killed writer."""
        target = self.path / filename
        if not target.exists():
            return
        data = target.read_bytes()
        if not data:
            return
        if data.endswith(b"\n"):
            head, _, last = data[:-1].rpartition(b"\n")
            try:
                json.loads(last)
                return
            except json.JSONDecodeError:
                keep = head + b"\n" if head else b""
        else:
            head, _, _ = data.rpartition(b"\n")
            keep = head + b"\n" if head else b""
        with open(target, "wb") as fh:
            fh.write(keep)
            fh.flush()
            os.fsync(fh.fileno())

    # --- generic jsonl ----------------------------------------------------

    def _append(self, filename: str, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True, ensure_ascii=False)
        with self._append_lock:
            with open(self.path / filename, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def _read_all(self, filename: str) -> list[dict]:
        target = self.path / filename
        if not target.exists():
            return []
        rows = []
        with open(target, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise StoreCorrupt(f"{filename}:{lineno}: {exc}") from exc
        return rows

    # --- evaluation records --------------------------------------------------

    @staticmethod
    def record_key(task_id: str, provider_id: str) -> str:
        return f"{task_id}--{provider_id}"

    def append_record(self, record: dict) -> None:
        record = dict(record)
        record["schema_version"] = SCHEMA_VERSION
        self._append("records.jsonl", record)

    def records(self) -> list[dict]:
        return self._read_all("records.jsonl")

    def completed_keys(self) -> set[str]:
        return {
            self.record_key(r["task"]["task_id"], r["provider_id"]) for r in self.records()
        }

    def write_raw(self, key: str, text: str) -> str:
        rel = f"raw/{key}.txt"
        (self.path / rel).write_text(text)
        return rel

    def read_raw(self, key: str) -> str:
        return (self.path / f"raw/{key}.txt").read_text()

    # --- tasks -----------------------------------------------------------------

    def append_task(self, task: dict) -> None:
        self._append("tasks.jsonl", task)

    def tasks(self) -> list[dict]:
        return self._read_all("tasks.jsonl")

    def task_ids(self) -> set[str]:
        return {t["task_id"] for t in self.tasks()}

    # --- verdict log -------------------------------------------------------------

    def append_verdict_op(self, op: dict) -> None:
        self._append("verdicts.jsonl", op)

    def verdict_ops(self) -> list[dict]:
        return self._read_all("verdicts.jsonl")

    # --- campaign state ------------------------------------------------------------

    def campaign_state(self) -> dict:
        target = self.path / "campaign.json"
        if not target.exists():
            return {"sealed": False}
        return json.loads(target.read_text())

    def write_campaign_state(self, state: dict) -> None:
        tmp = self.path / "campaign.json.tmp"
        tmp.write_text(json.dumps(state, sort_keys=True, indent=2))
        tmp.replace(self.path / "campaign.json")

    # --- derived index -------------------------------------------------------------

    def write_index(self) -> None:
        """Derived lookup: record key -> line number (1-based) in records.jsonl."""
        index = {
            self.record_key(r["task"]["task_id"], r["provider_id"]): {
                "line": i,
                "project": r["task"]["project"],
                "suggestion": r.get("suggestion"),
            }
            for i, r in enumerate(self.records(), 1)
        }
        tmp = self.path / "index.json.tmp"
        tmp.write_text(json.dumps(index, indent=2, sort_keys=True))
        tmp.replace(self.path / "index.json")

    # --- integrity -------------------------------------------------------------------

    def canonical_hash(self) -> str:
        """Order-independent digest of records, volatile fields excluded."""
        canon = sorted(
            json.dumps(_strip_volatile(r), sort_keys=True) for r in self.records()
        )
        digest = hashlib.sha256()
        for line in canon:
            digest.update(line.encode())
            digest.update(b"\n")
        return digest.hexdigest()
