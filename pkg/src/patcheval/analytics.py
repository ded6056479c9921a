"""Success rates, size binning, date splits and report rendering.

All computations run over immutable record views assembled from the run
store plus sealed triage verdicts. Rates are kept as exact count pairs and
rounded only at render time (half-up, one decimal, paper-style integer trim).
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from datetime import date
from decimal import ROUND_HALF_UP, Decimal

from .errors import PatchEvalError
from .miner import CommitKind
from .stats import WelchResult, welch_t
from .store import RunStore
from .triage import TriageStore, VerdictCategory, is_correct


class AnalyticsError(PatchEvalError):
    pass


class UnsealedVerdicts(AnalyticsError):
    pass


class EmptyEdges(AnalyticsError):
    pass


class NoDatedRecords(AnalyticsError):
    pass


class UnknownFormat(AnalyticsError):
    pass


# --- record views -----------------------------------------------------------------


@dataclass
class RecordView:
    task_id: str
    provider_id: str
    project: str
    kind: str  # CommitKind value
    file_loc: int
    function_loc: int
    author_date: date | None
    verdict: VerdictCategory | None  # unanimous reviewed category, else None
    excluded: bool = False  # provider could not run (context overflow etc.)

    @property
    def correct(self) -> bool | None:
        return None if self.verdict is None else is_correct(self.verdict)


def build_views(store: RunStore) -> list[RecordView]:
    """Join evaluation records with their unanimous verdicts."""
    verdicts = TriageStore(store).verdicts()
    views: list[RecordView] = []
    for record in store.records():
        task = record["task"]
        reviewers = verdicts.get((task["task_id"], record["provider_id"]), {})
        categories = {v.category for v in reviewers.values()}
        verdict = categories.pop() if len(categories) == 1 else None
        flags = record.get("machine_flags", {})
        views.append(
            RecordView(
                task_id=task["task_id"],
                provider_id=record["provider_id"],
                project=task["project"],
                kind=task["kind"],
                file_loc=task["file_loc"],
                function_loc=task["function_loc"],
                author_date=date.fromisoformat(task["author_date"]) if task.get("author_date") else None,
                verdict=verdict,
                excluded=bool(flags.get("context_overflow")),
            )
        )
    return views


# --- rendering helpers ----------------------------------------------------------------


def format_rate(rate: float | None) -> str:
    """Percentage at one decimal, half-up; integral values trim the .0 (52%)."""
    if rate is None:
        return "-"
    qty = Decimal(repr(rate * 100.0)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    text = str(qty)
    if text.endswith(".0"):
        text = text[:-2]
    return text + "%"


def format_p(p: float) -> str:
    """Four significant digits."""
    return f"{p:.4g}"


# --- success tables -------------------------------------------------------------------


@dataclass
class SuccessRow:
    n_correct: int = 0
    n_incorrect: int = 0

    @property
    def n(self) -> int:
        return self.n_correct + self.n_incorrect

    @property
    def success_rate(self) -> float | None:
        return self.n_correct / self.n if self.n else None


@dataclass
class SuccessTable:
    group_fields: tuple[str, ...]
    rows: dict[tuple, SuccessRow] = field(default_factory=dict)
    unreviewed: int = 0
    excluded: int = 0

    @classmethod
    def from_counts(cls, counts: dict[tuple, tuple[int, int]], group_fields=("group",)) -> "SuccessTable":
        table = cls(group_fields=tuple(group_fields))
        for key, (n_correct, n_incorrect) in counts.items():
            table.rows[key] = SuccessRow(n_correct, n_incorrect)
        return table

    def total_counted(self) -> int:
        return sum(row.n for row in self.rows.values())


def success_rate(
    records: list[RecordView],
    group_by: tuple[str, ...] = ("project", "provider_id"),
    strict: bool = True,
) -> SuccessTable:
    """Counts and rates per group over sealed (unanimous) verdicts.

    Excluded records (the provider never ran) stay out of the denominators;
    unreviewed records raise UnsealedVerdicts when strict, else are tallied
    separately.
    """
    table = SuccessTable(group_fields=group_by)
    for view in records:
        if view.excluded:
            table.excluded += 1
            continue
        if view.verdict is None:
            if strict:
                raise UnsealedVerdicts(
                    f"record {view.task_id}--{view.provider_id} has no unanimous verdict"
                )
            table.unreviewed += 1
            continue
        key = tuple(getattr(view, f) for f in group_by)
        row = table.rows.setdefault(key, SuccessRow())
        if view.correct:
            row.n_correct += 1
        else:
            row.n_incorrect += 1
    return table


def kind_split(records: list[RecordView], strict: bool = True) -> SuccessTable:
    return success_rate(records, group_by=("kind",), strict=strict)


# --- size binning ----------------------------------------------------------------------

# Named presets anchored at the published thresholds (603 file LOC, 56
# function LOC), doubled outward; the original figure edges are unpublished.
PAPER_FILE_SIZE_EDGES = [1, 151, 302, 603, 1206, 2412, 4824, 150000]
PAPER_FUNCTION_SIZE_EDGES = [1, 14, 28, 56, 112, 224, 2000]


@dataclass
class RateBin:
    lo: int
    hi: int
    closed_above: bool
    n: int = 0
    n_correct: int = 0

    @property
    def rate(self) -> float | None:
        return self.n_correct / self.n if self.n else None


@dataclass
class BinnedRates:
    size_field: str
    bin_edges: list[int]
    bins: list[RateBin]
    out_of_range: int = 0


def quartile_edges(records: list[RecordView], size_field: str) -> list[int]:
    sizes = sorted(getattr(v, size_field) for v in records)
    if not sizes:
        raise EmptyEdges("no records to derive edges from")
    qs = statistics.quantiles(sizes, n=4, method="inclusive") if len(sizes) >= 2 else []
    edges = [sizes[0], *(int(q) for q in qs), sizes[-1] + 1]
    deduped = sorted(set(edges))
    return deduped if len(deduped) >= 2 else [sizes[0], sizes[0] + 1]


def bin_rates(
    records: list[RecordView],
    size_field: str,
    edges: list[int] | None = None,
    strict: bool = True,
) -> BinnedRates:
    """Bin i holds edges[i] <= size < edges[i+1]; the last bin is closed above."""
    if size_field not in ("file_loc", "function_loc"):
        raise AnalyticsError(f"unknown size field {size_field!r}")
    usable = [v for v in records if not v.excluded]
    if edges is None:
        edges = quartile_edges(usable, size_field)
    if not edges or len(edges) < 2:
        raise EmptyEdges("need at least two ascending edge values")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise EmptyEdges(f"edges not strictly ascending: {edges}")

    bins = [
        RateBin(lo, hi, closed_above=(i == len(edges) - 2))
        for i, (lo, hi) in enumerate(zip(edges, edges[1:]))
    ]
    result = BinnedRates(size_field, list(edges), bins)
    for view in usable:
        if view.verdict is None:
            if strict:
                raise UnsealedVerdicts(f"record {view.task_id}--{view.provider_id} unreviewed")
            continue
        size = getattr(view, size_field)
        placed = False
        for b in bins:
            if b.lo <= size < b.hi or (b.closed_above and size == b.hi):
                b.n += 1
                if view.correct:
                    b.n_correct += 1
                placed = True
                break
        if not placed:
            result.out_of_range += 1
    return result


# --- date split -------------------------------------------------------------------------


@dataclass
class CutoffCell:
    n: int = 0
    n_correct: int = 0

    @property
    def rate(self) -> float | None:
        return self.n_correct / self.n if self.n else None


@dataclass
class CutoffSplit:
    cutoff: date
    median_loc: float
    cells: dict[tuple[str, str], CutoffCell]  # (before|after, below|above)


def cutoff_split(
    records: list[RecordView], cutoff: date, strict: bool = True
) -> CutoffSplit:
    """2x2 success rates: commit date before/after cutoff x file size vs median.

    "below" is strictly under the median; ties land in the "above" column.
    Empty cells render as absent, never as 0%.
    """
    dated = [v for v in records if v.author_date is not None and not v.excluded]
    if not dated:
        raise NoDatedRecords("no records carry an author date")
    included = []
    for view in dated:
        if view.verdict is None:
            if strict:
                raise UnsealedVerdicts(f"record {view.task_id}--{view.provider_id} unreviewed")
            continue
        included.append(view)
    if not included:
        raise NoDatedRecords("no dated records with sealed verdicts")
    median_loc = statistics.median(v.file_loc for v in included)
    cells = {
        (when, side): CutoffCell() for when in ("before", "after") for side in ("below", "above")
    }
    for view in included:
        when = "before" if view.author_date < cutoff else "after"
        side = "below" if view.file_loc < median_loc else "above"
        cell = cells[(when, side)]
        cell.n += 1
        if view.correct:
            cell.n_correct += 1
    return CutoffSplit(cutoff, median_loc, cells)


# --- size significance ---------------------------------------------------------------------


@dataclass
class SizeSignificance:
    provider_id: str
    size_field: str
    result: WelchResult | None
    note: str = ""


def size_significance(records: list[RecordView], strict: bool = True) -> list[SizeSignificance]:
    """Per provider: do successes and failures differ in mean size?"""
    from .stats import DegenerateSample

    providers = sorted({v.provider_id for v in records if not v.excluded})
    out: list[SizeSignificance] = []
    for provider in providers:
        views = [v for v in records if v.provider_id == provider and not v.excluded]
        for size_field in ("file_loc", "function_loc"):
            success = [float(getattr(v, size_field)) for v in views if v.correct is True]
            failure = [float(getattr(v, size_field)) for v in views if v.correct is False]
            if strict and any(v.verdict is None for v in views):
                raise UnsealedVerdicts(f"provider {provider} has unreviewed records")
            try:
                result = welch_t(success, failure)
                note = ""
            except DegenerateSample as exc:
                result = None
                note = str(exc)
            out.append(SizeSignificance(provider, size_field, result, note))
    return out


# --- report rendering --------------------------------------------------------------------

FORMATS = ("plain", "csv", "markdown")


def _success_table_rows(table: SuccessTable) -> list[list[str]]:
    header = [*table.group_fields, "correct", "incorrect", "success_rate"]
    rows = [header]
    for key in sorted(table.rows):
        row = table.rows[key]
        rows.append([*map(str, key), str(row.n_correct), str(row.n_incorrect), format_rate(row.success_rate)])
    return rows


def _binned_rows(binned: BinnedRates) -> list[list[str]]:
    rows = [["bin", "n", "correct", "rate"]]
    for b in binned.bins:
        bound = f"[{b.lo}, {b.hi}]" if b.closed_above else f"[{b.lo}, {b.hi})"
        rows.append([bound, str(b.n), str(b.n_correct), format_rate(b.rate)])
    return rows


def _cutoff_rows(split: CutoffSplit) -> list[list[str]]:
    rows = [["period", "loc<median", "loc>=median"]]
    for when in ("before", "after"):
        cells = [split.cells[(when, side)] for side in ("below", "above")]
        rows.append(
            [when]
            + [f"{format_rate(c.rate)} ({c.n_correct} out of {c.n})" if c.n else "-" for c in cells]
        )
    return rows


def _welch_rows(entries: list[SizeSignificance]) -> list[list[str]]:
    rows = [["provider", "size", "mean_success", "mean_failure", "t", "df", "p"]]
    for e in entries:
        if e.result is None:
            rows.append([e.provider_id, e.size_field, "-", "-", "-", "-", e.note or "-"])
        else:
            r = e.result
            rows.append(
                [
                    e.provider_id,
                    e.size_field,
                    f"{r.mean_a:.1f}",
                    f"{r.mean_b:.1f}",
                    f"{r.t:.4f}",
                    f"{r.df:.2f}",
                    format_p(r.p),
                ]
            )
    return rows


def _as_rows(table) -> list[list[str]]:
    if isinstance(table, SuccessTable):
        return _success_table_rows(table)
    if isinstance(table, BinnedRates):
        return _binned_rows(table)
    if isinstance(table, CutoffSplit):
        return _cutoff_rows(table)
    if isinstance(table, list) and all(isinstance(e, SizeSignificance) for e in table):
        return _welch_rows(table)
    raise AnalyticsError(f"cannot render {type(table).__name__}")


def _render_plain(name: str, rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [f"== {name} =="]
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    return "\n".join(lines) + "\n"


def _render_csv(rows: list[list[str]]) -> str:
    def quote(cell: str) -> str:
        if any(c in cell for c in ",\"\n"):
            return '"' + cell.replace('"', '""') + '"'
        return cell

    return "\n".join(",".join(quote(c) for c in row) for row in rows) + "\n"


def _render_markdown(name: str, rows: list[list[str]]) -> str:
    lines = [f"### {name}", ""]
    lines.append("| " + " | ".join(rows[0]) + " |")
    lines.append("|" + "|".join(" --- " for _ in rows[0]) + "|")
    for row in rows[1:]:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def render_report(tables: dict[str, object], fmt: str = "plain") -> dict[str, str]:
    """Deterministic report files: one per table, stable names and bytes."""
    if fmt not in FORMATS:
        raise UnknownFormat(f"format must be one of {FORMATS}, got {fmt!r}")
    ext = {"plain": "txt", "csv": "csv", "markdown": "md"}[fmt]
    files: dict[str, str] = {}
    for name in sorted(tables):
        rows = _as_rows(tables[name])
        if fmt == "plain":
            content = _render_plain(name, rows)
        elif fmt == "csv":
            content = _render_csv(rows)
        else:
            content = _render_markdown(name, rows)
        files[f"{name}.{ext}"] = content
    return files
