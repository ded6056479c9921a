"""Locating and replacing top-level C function definitions.

A heuristic lexical scanner, not a C grammar: it masks comments, string and
character literals and preprocessor directive lines, then brace-matches the
rest at face value. That is enough to find top-level definition spans; macro
generated definitions are out of scope and report NotFound.
"""

from __future__ import annotations

import difflib
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .errors import PatchEvalError


class SplicerError(PatchEvalError):
    pass


class NotFound(SplicerError):
    pass


class Ambiguous(SplicerError):
    pass


class Unbalanced(SplicerError):
    pass


class SpanStale(SplicerError):
    pass


class AlreadyDefined(SplicerError):
    pass


@dataclass
class FunctionSpan:
    name: str
    start_line: int  # 1-based, inclusive; first line of the return type / declarator
    end_line: int  # line holding the closing brace
    signature_text: str


class SpliceMode(Enum):
    REPLACE = "replace"
    INSERT = "insert"
    WHOLE_FILE_ADOPT = "whole-file-adopt"


@dataclass
class StructureDelta:
    """What a whole-file candidate did to the pre-commit file's structure."""

    deleted_functions: list[str] = field(default_factory=list)
    added_functions: list[str] = field(default_factory=list)
    deleted_case_labels: list[str] = field(default_factory=list)
    changed_outside_target: bool = False
    lines_added: int = 0
    lines_removed: int = 0
    parse_failed: bool = False

    def is_empty(self) -> bool:
        return (
            not self.deleted_functions
            and not self.added_functions
            and not self.deleted_case_labels
            and self.lines_added == 0
            and self.lines_removed == 0
        )

    def to_dict(self) -> dict:
        return {
            "deleted_functions": self.deleted_functions,
            "added_functions": self.added_functions,
            "deleted_case_labels": self.deleted_case_labels,
            "changed_outside_target": self.changed_outside_target,
            "lines_added": self.lines_added,
            "lines_removed": self.lines_removed,
            "parse_failed": self.parse_failed,
        }


@dataclass
class SplicedSource:
    text: str
    mode: SpliceMode
    replaced_span: FunctionSpan | None
    structure_delta: StructureDelta | None = None


# --- masking -----------------------------------------------------------------


def mask_source(text: str) -> tuple[str, list[tuple[int, str]]]:
    """Blank out comments, literals and preprocessor lines, keeping geometry.

    Returns the masked text (same length, newlines kept) and the list of
    (line_number, text) for conditional-compilation directives, used for
    Unbalanced diagnostics and footer detection.
    """
    out = list(text)
    directives: list[tuple[int, str]] = []
    n = len(text)
    i = 0
    line = 1
    at_line_start = True  # only whitespace seen since last newline

    def blank(j: int) -> None:
        if out[j] != "\n":
            out[j] = " "

    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            at_line_start = True
            i += 1
            continue
        if at_line_start and c == "#":
            # Preprocessor directive: mask to end of line, honoring \ splices.
            start_line = line
            j = i
            while j < n:
                if text[j] == "\n":
                    if j > 0 and text[j - 1] == "\\":
                        line += 1
                        blank(j - 1)
                        j += 1
                        continue
                    break
                blank(j)
                j += 1
            directive_text = text[i:j].split("\n", 1)[0].strip()
            if re.match(r"#\s*(if|ifdef|ifndef|elif|else|endif)\b", directive_text):
                directives.append((start_line, directive_text))
            i = j
            at_line_start = True
            continue
        if not c.isspace():
            at_line_start = False
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                blank(i)
                i += 1
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "*":
            blank(i)
            blank(i + 1)
            i += 2
            while i < n and not (text[i] == "*" and i + 1 < n and text[i + 1] == "/"):
                if text[i] == "\n":
                    line += 1
                blank(i)
                i += 1
            if i < n:
                blank(i)
                blank(i + 1)
                i += 2
            continue
        if c in ('"', "'"):
            quote = c
            blank(i)
            i += 1
            while i < n and text[i] != quote:
                if text[i] == "\n":  # unterminated literal; bail at line end
                    break
                if text[i] == "\\" and i + 1 < n and text[i + 1] != "\n":
                    blank(i)
                    i += 1
                blank(i)
                i += 1
            if i < n and text[i] == quote:
                blank(i)
                i += 1
            continue
        i += 1
    return "".join(out), directives


# --- top-level scanning ------------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z_]\w*|\S")
_IDENT_RE = re.compile(r"[A-Za-z_]\w*\Z")


def _line_of(offsets: list[int], pos: int) -> int:
    """1-based line number of byte offset ``pos`` given line start offsets."""
    lo, hi = 0, len(offsets) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if offsets[mid] <= pos:
            lo = mid
        else:
            hi = mid - 1
    return lo + 1


def _line_offsets(text: str) -> list[int]:
    offs = [0]
    for idx, ch in enumerate(text):
        if ch == "\n":
            offs.append(idx + 1)
    return offs


def scan_functions(source: str) -> list[FunctionSpan]:
    """All top-level function definition spans, in file order.

    Raises Unbalanced when braces never return to depth zero; the message
    names the first conditional directive line when one exists, since #if
    asymmetry is the usual culprit.
    """
    masked, directives = mask_source(source)
    offsets = _line_offsets(source)
    tokens = [(m.group(), m.start()) for m in _TOKEN_RE.finditer(masked)]
    spans: list[FunctionSpan] = []

    depth = 0
    i = 0
    prev_ident: tuple[str, int] | None = None  # (name, token index)

    def match_paren(idx: int) -> int:
        """Index of the token closing the paren opened at tokens[idx]; -1 if none."""
        level = 0
        for k in range(idx, len(tokens)):
            t = tokens[k][0]
            if t == "(":
                level += 1
            elif t == ")":
                level -= 1
                if level == 0:
                    return k
        return -1

    def match_brace(idx: int) -> int:
        level = 0
        for k in range(idx, len(tokens)):
            t = tokens[k][0]
            if t == "{":
                level += 1
            elif t == "}":
                level -= 1
                if level == 0:
                    return k
        return -1

    def knr_then_body(idx: int) -> int:
        """From token idx (after ')'), skip K&R parameter declarations.

        Returns the index of the body '{', or -1 when what follows is not a
        function body.
        """
        k = idx
        while k < len(tokens):
            t = tokens[k][0]
            if t == "{":
                return k
            if t in (";", ")", "(", "}", "=", ","):
                # ';' right here means prototype; anything else is not a def.
                if t == ";" and k > idx:
                    k += 1  # end of one K&R declaration clause
                    continue
                return -1
            k += 1
        return -1

    while i < len(tokens):
        tok, pos = tokens[i]
        if tok == "{":
            depth += 1
            prev_ident = None
            i += 1
            continue
        if tok == "}":
            depth -= 1
            prev_ident = None
            i += 1
            continue
        if depth == 0 and tok == "(" and prev_ident is not None:
            close = match_paren(i)
            if close == -1:
                break
            body = knr_then_body(close + 1)
            if body != -1:
                name, name_idx = prev_ident
                end_tok = match_brace(body)
                if end_tok == -1:
                    first_cond = f"; first conditional at line {directives[0][0]}: {directives[0][1]}" if directives else ""
                    raise Unbalanced(f"braces never close for {name!r}{first_cond}")
                start_idx = _declarator_start(tokens, name_idx)
                start_pos = tokens[start_idx][1]
                start_line = _line_of(offsets, start_pos)
                end_line = _line_of(offsets, tokens[end_tok][1])
                sig_end = tokens[body][1]
                signature = source[start_pos:sig_end].rstrip()
                spans.append(FunctionSpan(name, start_line, end_line, signature))
                i = end_tok + 1
                prev_ident = None
                continue
            # Not a definition (prototype, macro call, initializer …): skip group.
            i = close + 1
            prev_ident = None
            continue
        prev_ident = (tok, i) if _IDENT_RE.match(tok) else None
        i += 1

    if depth != 0:
        first_cond = f"; first conditional at line {directives[0][0]}: {directives[0][1]}" if directives else ""
        raise Unbalanced(f"unbalanced braces at top level (depth {depth} at EOF){first_cond}")
    return spans


def _declarator_start(tokens: list[tuple[str, int]], name_idx: int) -> int:
    """Walk back over return-type tokens from the function name."""
    k = name_idx
    while k > 0:
        t = tokens[k - 1][0]
        if _IDENT_RE.match(t) or t == "*":
            k -= 1
            continue
        break
    return k


# --- public operations --------------------------------------------------------


def locate_function(source: str, name: str) -> FunctionSpan:
    """Find the unique top-level definition of ``name``."""
    if not name:
        raise NotFound("empty function name")
    matches = [s for s in scan_functions(source) if s.name == name]
    if not matches:
        raise NotFound(f"no top-level definition of {name!r}")
    if len(matches) > 1:
        lines = ", ".join(str(s.start_line) for s in matches)
        raise Ambiguous(f"{name!r} defined {len(matches)} times (lines {lines})")
    return matches[0]


def extract_span(source: str, span: FunctionSpan) -> str:
    """The exact text of the span's lines, trailing newline included if present."""
    lines = source.splitlines(keepends=True)
    return "".join(lines[span.start_line - 1 : span.end_line])


def splice(source: str, span: FunctionSpan, replacement: str) -> SplicedSource:
    """Replace the span's lines with ``replacement``; all other bytes untouched."""
    try:
        current = locate_function(source, span.name)
    except SplicerError as exc:
        raise SpanStale(f"span for {span.name!r} no longer locatable: {exc}") from exc
    if (current.start_line, current.end_line) != (span.start_line, span.end_line):
        raise SpanStale(
            f"span for {span.name!r} moved: was lines {span.start_line}-{span.end_line}, "
            f"now {current.start_line}-{current.end_line}"
        )
    lines = source.splitlines(keepends=True)
    prefix = "".join(lines[: span.start_line - 1])
    suffix = "".join(lines[span.end_line :])
    body = replacement
    if suffix or source.endswith("\n"):
        if not body.endswith("\n"):
            body += "\n"
    else:
        body = body.rstrip("\n")
    return SplicedSource(text=prefix + body + suffix, mode=SpliceMode.REPLACE, replaced_span=span)


def insert_function(source: str, function_text: str) -> SplicedSource:
    """Append a new top-level definition at end of file, before any #endif footer."""
    new_defs = scan_functions(function_text)  # raises Unbalanced on bad braces
    if len(new_defs) != 1:
        raise Unbalanced(
            f"replacement must contain exactly one top-level definition, found {len(new_defs)}"
        )
    name = new_defs[0].name
    if any(s.name == name for s in scan_functions(source)):
        raise AlreadyDefined(f"{name!r} already defined at top level")

    lines = source.splitlines(keepends=True)
    idx = len(lines)
    while idx > 0 and lines[idx - 1].strip() == "":
        idx -= 1
    footer_end = idx
    while idx > 0 and lines[idx - 1].lstrip().startswith("#endif"):
        idx -= 1
    if idx == footer_end:
        idx = len(lines)  # no footer: insert at true EOF, past trailing blanks

    before = "".join(lines[:idx])
    after = "".join(lines[idx:])
    pieces = []
    if before:
        if not before.endswith("\n"):
            before += "\n"
        pieces.append(before)
        pieces.append("\n")  # one separator line between last definition and the new one
    body = function_text if function_text.endswith("\n") else function_text + "\n"
    pieces.append(body)
    pieces.append(after)
    text = "".join(pieces)

    out_spans = [s for s in scan_functions(text) if s.name == name]
    return SplicedSource(text=text, mode=SpliceMode.INSERT, replaced_span=out_spans[0])


_CASE_LABEL_RE = re.compile(r"\bcase\b([^:;{}\n]*):")


def _case_labels(source: str) -> Counter:
    masked, _ = mask_source(source)
    labels = Counter()
    for m in _CASE_LABEL_RE.finditer(masked):
        # Label text was masked if it held literals; recover from the original.
        labels[source[m.start(1) : m.end(1)].strip()] += 1
    return labels


def adopt_whole_file(
    pre: str,
    candidate_file: str,
    target_name: str,
    target_span: FunctionSpan | None = None,
) -> SplicedSource:
    """Use a whole-file candidate as-is and record its structural drift.

    ``target_span`` is the target function's span in ``pre`` (None for
    new-function tasks). The structural delta lets triage flag deletions
    unrelated to the task.
    """
    delta = StructureDelta()
    try:
        pre_defs = [s.name for s in scan_functions(pre)]
        cand_defs = [s.name for s in scan_functions(candidate_file)]
        pre_set, cand_set = set(pre_defs), set(cand_defs)
        delta.deleted_functions = sorted(pre_set - cand_set)
        delta.added_functions = sorted(cand_set - pre_set)
        removed_cases = _case_labels(pre) - _case_labels(candidate_file)
        delta.deleted_case_labels = sorted(removed_cases.elements())
    except SplicerError:
        delta.parse_failed = True

    pre_lines = pre.splitlines()
    cand_lines = candidate_file.splitlines()
    matcher = difflib.SequenceMatcher(a=pre_lines, b=cand_lines, autojunk=False)
    changed_outside = False
    for op, a1, a2, b1, b2 in matcher.get_opcodes():
        if op == "equal":
            continue
        delta.lines_removed += a2 - a1
        delta.lines_added += b2 - b1
        if target_span is None:
            if op in ("replace", "delete"):
                changed_outside = True
            continue
        lo, hi = target_span.start_line, target_span.end_line  # 1-based inclusive
        if op == "insert":
            # Anchored between pre lines a1 and a1+1.
            if not (lo <= a1 < hi or a1 == hi):
                changed_outside = True
        else:
            pre_first, pre_last = a1 + 1, a2
            if pre_first < lo or pre_last > hi:
                changed_outside = True
    delta.changed_outside_target = changed_outside

    return SplicedSource(
        text=candidate_file,
        mode=SpliceMode.WHOLE_FILE_ADOPT,
        replaced_span=target_span,
        structure_delta=delta,
    )
