"""Unified diff parsing, applying and line accounting.

Only single-file diffs are handled here; the miner rejects multi-file
commits before this code runs.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field

from .errors import PatchEvalError


class DiffDoesNotApply(PatchEvalError):
    """Hunk context or removed lines disagree with the base text."""


_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


@dataclass
class Hunk:
    old_start: int  # 1-based; 0 when old_count == 0 (pure insertion at top)
    old_count: int
    new_start: int
    new_count: int
    lines: list[tuple[str, str]] = field(default_factory=list)  # (tag, text); tag in ' +-'

    @property
    def added(self) -> int:
        return sum(1 for tag, _ in self.lines if tag == "+")

    @property
    def removed(self) -> int:
        return sum(1 for tag, _ in self.lines if tag == "-")


def parse_unified(diff_text: str) -> list[Hunk]:
    """Parse the hunks of a single-file unified diff.

    Header lines (diff --git, index, ---/+++) are skipped; "\\ No newline at
    end of file" markers are folded into the preceding line's bookkeeping.
    """
    hunks: list[Hunk] = []
    current: Hunk | None = None
    for raw in diff_text.splitlines():
        m = _HUNK_RE.match(raw)
        if m:
            current = Hunk(
                old_start=int(m.group(1)),
                old_count=int(m.group(2)) if m.group(2) is not None else 1,
                new_start=int(m.group(3)),
                new_count=int(m.group(4)) if m.group(4) is not None else 1,
            )
            hunks.append(current)
            continue
        if current is None:
            continue  # preamble
        if raw.startswith("\\"):
            continue  # no-newline marker
        if raw[:1] in ("+", "-", " "):
            current.lines.append((raw[0], raw[1:]))
        elif raw == "":
            # Some tools emit empty context lines with the leading space eaten.
            current.lines.append((" ", ""))
        else:
            current = None  # next file header or git noise; stop filling
    return hunks


def changed_line_count(diff_text: str) -> int:
    """Added plus removed lines, context excluded."""
    hunks = parse_unified(diff_text)
    return sum(h.added + h.removed for h in hunks)


def apply_unified(base: str, diff_text: str) -> str:
    """Apply a single-file unified diff to ``base`` and return the new text.

    Raises DiffDoesNotApply when context or removed lines mismatch.
    """
    hunks = parse_unified(diff_text)
    base_lines = base.splitlines()
    out: list[str] = []
    cursor = 0  # index into base_lines of next unconsumed line
    for hunk in hunks:
        # old_start is 1-based; a zero old_count hunk inserts after old_start.
        anchor = hunk.old_start - 1 if hunk.old_count > 0 else hunk.old_start
        if anchor < cursor or anchor > len(base_lines):
            raise DiffDoesNotApply(f"hunk at -{hunk.old_start} overlaps or exceeds base")
        out.extend(base_lines[cursor:anchor])
        cursor = anchor
        for tag, text in hunk.lines:
            if tag == " ":
                if cursor >= len(base_lines) or base_lines[cursor] != text:
                    raise DiffDoesNotApply(
                        f"context mismatch at base line {cursor + 1}: {text!r}"
                    )
                out.append(text)
                cursor += 1
            elif tag == "-":
                if cursor >= len(base_lines) or base_lines[cursor] != text:
                    raise DiffDoesNotApply(
                        f"removed line mismatch at base line {cursor + 1}: {text!r}"
                    )
                cursor += 1
            else:  # '+'
                out.append(text)
    out.extend(base_lines[cursor:])
    text = "\n".join(out)
    if base.endswith("\n") or not base:
        text += "\n" if out else ""
    return text


def pre_image_intervals(diff_text: str) -> list[tuple[int, int, str]]:
    """Per-hunk pre-image footprints as (lo, hi, kind), 1-based inclusive.

    kind "change": lines lo..hi were removed or rewritten. kind "insert":
    a pure insertion anchored after pre line lo (== hi); nothing removed.
    """
    intervals: list[tuple[int, int, str]] = []
    for hunk in parse_unified(diff_text):
        # A zero-width hunk's old_start names the line the insertion follows.
        old_line = hunk.old_start if hunk.old_count > 0 else hunk.old_start + 1
        first: int | None = None
        last: int | None = None
        pending_insert_at: int | None = None
        for tag, _ in hunk.lines:
            if tag == " ":
                old_line += 1
            elif tag == "-":
                if first is None:
                    first = old_line
                last = old_line
                old_line += 1
            else:  # '+': anchored between old_line-1 and old_line
                if first is None and pending_insert_at is None:
                    pending_insert_at = old_line - 1
                if first is not None:
                    last = max(last or 0, old_line - 1)
        if first is not None:
            intervals.append((first, last if last is not None else first, "change"))
        elif pending_insert_at is not None:
            intervals.append((pending_insert_at, pending_insert_at, "insert"))
    return intervals


def make_unified(a: str, b: str, path: str = "file") -> str:
    """Generate a unified diff between two texts (used by fixtures and views)."""
    lines = difflib.unified_diff(
        a.splitlines(keepends=True),
        b.splitlines(keepends=True),
        fromfile=f"a/{path}",
        tofile=f"b/{path}",
    )
    return "".join(lines)
