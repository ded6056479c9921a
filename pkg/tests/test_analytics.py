from datetime import date

import pytest

from patcheval.analytics import (
    EmptyEdges,
    NoDatedRecords,
    PAPER_FILE_SIZE_EDGES,
    PAPER_FUNCTION_SIZE_EDGES,
    RecordView,
    SuccessTable,
    UnknownFormat,
    UnsealedVerdicts,
    bin_rates,
    cutoff_split,
    format_p,
    format_rate,
    kind_split,
    render_report,
    success_rate,
)
from patcheval.triage import VerdictCategory

CORRECT = VerdictCategory.DIFFERENT_APPEARS_CORRECT
IDENTICAL = VerdictCategory.IDENTICAL_TO_HUMAN
WRONG = VerdictCategory.WRONG_SOLUTION


def view(i=0, *, kind="bug-fix", verdict=WRONG, file_loc=100, function_loc=10,
         when=date(2024, 3, 1), provider="p1", project="demo", excluded=False):
    return RecordView(
        task_id=f"t{i}",
        provider_id=provider,
        project=project,
        kind=kind,
        file_loc=file_loc,
        function_loc=function_loc,
        author_date=when,
        verdict=verdict,
        excluded=excluded,
    )


def views_with_counts(n_correct, n_incorrect, *, kind="bug-fix", start=0):
    out = []
    i = start
    for _ in range(n_correct):
        out.append(view(i, kind=kind, verdict=CORRECT))
        i += 1
    for _ in range(n_incorrect):
        out.append(view(i, kind=kind, verdict=WRONG))
        i += 1
    return out


# --- format helpers -------------------------------------------------------------


@pytest.mark.parametrize(
    "n_correct,n_total,text",
    [
        (13, 25, "52%"),      # rate 52.0 renders paper-style without the .0
        (56, 187, "29.9%"),
        (4, 23, "17.4%"),
        (3, 22, "13.6%"),
        (2, 14, "14.3%"),
        (1, 16, "6.3%"),      # 6.25 rounds half-up, not banker's
        (12, 20, "60%"),
    ],
)
def test_format_rate_matches_published_rendering(n_correct, n_total, text):
    assert format_rate(n_correct / n_total) == text


def test_format_rate_one_decimal_values():
    assert f"{13 / 25 * 100:.1f}" == "52.0"
    assert format_rate(None) == "-"


def test_format_p_four_significant_digits():
    assert format_p(0.28794072) == "0.2879"
    assert format_p(0.00012345) == "0.0001234"


# --- success tables ----------------------------------------------------------------


def test_success_rate_feature_and_bug_counts():
    records = views_with_counts(13, 12, kind="feature-enhancement")
    records += views_with_counts(56, 131, kind="bug-fix", start=100)
    table = kind_split(records)
    feature = table.rows[("feature-enhancement",)]
    bug = table.rows[("bug-fix",)]
    assert (feature.n_correct, feature.n_incorrect) == (13, 12)
    assert format_rate(feature.success_rate) == "52%"
    assert f"{feature.success_rate * 100:.1f}" == "52.0"
    assert format_rate(bug.success_rate) == "29.9%"


def test_success_rate_empty_records():
    table = success_rate([])
    assert table.rows == {}
    assert table.total_counted() == 0


def test_success_rate_counts_sum_to_sealed_records():
    records = views_with_counts(3, 1)
    table = success_rate(records)
    assert table.total_counted() == 4


def test_success_rate_unsealed_strict_raises():
    records = [view(0, verdict=None)]
    with pytest.raises(UnsealedVerdicts):
        success_rate(records)
    table = success_rate(records, strict=False)
    assert table.unreviewed == 1 and table.total_counted() == 0


def test_success_rate_excluded_records_kept_out_of_denominator():
    records = views_with_counts(1, 1) + [view(9, verdict=None, excluded=True)]
    table = success_rate(records)
    assert table.excluded == 1
    assert table.total_counted() == 2


def test_from_counts_reproduces_sixty_percent_row():
    table = SuccessTable.from_counts({("proj", "p"): (12, 8)}, ("project", "provider"))
    assert format_rate(table.rows[("proj", "p")].success_rate) == "60%"


# --- binning ----------------------------------------------------------------------


def test_bin_rates_single_bin_degenerate():
    records = views_with_counts(2, 2)
    binned = bin_rates(records, "file_loc", edges=[1, 1000])
    assert [b.n for b in binned.bins] == [4]


def test_bin_rates_boundary_at_603():
    records = [view(0, file_loc=602, verdict=CORRECT), view(1, file_loc=603, verdict=WRONG)]
    binned = bin_rates(records, "file_loc", edges=PAPER_FILE_SIZE_EDGES)
    idx_602 = next(i for i, b in enumerate(binned.bins) if b.lo <= 602 < b.hi)
    idx_603 = next(i for i, b in enumerate(binned.bins) if b.lo <= 603 < b.hi)
    assert idx_603 == idx_602 + 1
    assert binned.bins[idx_602].n == 1 and binned.bins[idx_603].n == 1


def test_bin_rates_boundary_at_56():
    records = [view(0, function_loc=55, verdict=CORRECT), view(1, function_loc=56, verdict=WRONG)]
    binned = bin_rates(records, "function_loc", edges=PAPER_FUNCTION_SIZE_EDGES)
    placed = [i for i, b in enumerate(binned.bins) if b.n]
    assert len(placed) == 2 and placed[1] == placed[0] + 1


def test_bin_counts_sum_to_total():
    records = views_with_counts(7, 5)
    binned = bin_rates(records, "file_loc", edges=[1, 50, 101])
    assert sum(b.n for b in binned.bins) + binned.out_of_range == 12


def test_bin_boundary_move_changes_two_bins():
    base = [view(i, file_loc=100 + i, verdict=CORRECT) for i in range(6)]
    before = bin_rates(base, "file_loc", edges=[100, 103, 106])
    moved = [view(i, file_loc=(100 + i if i != 2 else 104), verdict=CORRECT) for i in range(6)]
    after = bin_rates(moved, "file_loc", edges=[100, 103, 106])
    deltas = [a.n - b.n for a, b in zip(after.bins, before.bins)]
    assert sorted(deltas) == [-1, 1]


def test_bin_rates_rejects_bad_edges():
    with pytest.raises(EmptyEdges):
        bin_rates(views_with_counts(1, 0), "file_loc", edges=[])
    with pytest.raises(EmptyEdges):
        bin_rates(views_with_counts(1, 0), "file_loc", edges=[10, 10])


def test_bin_rates_default_edges_cover_corpus():
    records = [view(i, file_loc=loc, verdict=CORRECT) for i, loc in enumerate([10, 50, 100, 400, 900])]
    binned = bin_rates(records, "file_loc")
    assert sum(b.n for b in binned.bins) == 5
    assert binned.out_of_range == 0


# --- cutoff split ------------------------------------------------------------------


def test_cutoff_split_paper_cells():
    cutoff = date(2024, 5, 1)
    records = []
    i = 0
    # before x below: 4 of 23; before x above: 3 of 22
    for n_corr, n_total, when, loc in [
        (4, 23, date(2024, 1, 1), 50),
        (3, 22, date(2024, 1, 1), 500),
        (2, 14, date(2024, 9, 1), 50),
        (1, 16, date(2024, 9, 1), 500),
    ]:
        for k in range(n_total):
            records.append(view(i, when=when, file_loc=loc, verdict=CORRECT if k < n_corr else WRONG))
            i += 1
    split = cutoff_split(records, cutoff)
    assert format_rate(split.cells[("before", "below")].rate) == "17.4%"
    assert format_rate(split.cells[("before", "above")].rate) == "13.6%"
    assert format_rate(split.cells[("after", "below")].rate) == "14.3%"
    assert format_rate(split.cells[("after", "above")].rate) == "6.3%"


def test_cutoff_split_one_sided_cells_absent():
    records = views_with_counts(2, 2)  # all dated 2024-03-01, before the cutoff
    split = cutoff_split(records, date(2025, 1, 1))
    assert split.cells[("after", "below")].n == 0
    assert split.cells[("after", "below")].rate is None
    assert format_rate(split.cells[("after", "below")].rate) == "-"


def test_cutoff_split_requires_dates():
    records = [view(0, when=None)]
    with pytest.raises(NoDatedRecords):
        cutoff_split(records, date(2024, 5, 1))


# --- rendering -----------------------------------------------------------------------


def test_render_report_contains_paper_rates():
    records = views_with_counts(13, 12, kind="feature-enhancement")
    records += views_with_counts(56, 131, kind="bug-fix", start=100)
    files = render_report({"kind_split": kind_split(records)}, "plain")
    text = files["kind_split.txt"]
    assert "52%" in text and "29.9%" in text


def test_render_report_empty_table_headers_only():
    files = render_report({"success": success_rate([])}, "csv")
    assert files["success.csv"].splitlines() == ["project,provider_id,correct,incorrect,success_rate"]


def test_render_report_deterministic():
    records = views_with_counts(3, 2)
    tables = {"success": success_rate(records)}
    assert render_report(tables, "markdown") == render_report(tables, "markdown")


def test_render_report_unknown_format():
    with pytest.raises(UnknownFormat):
        render_report({}, "xml")


def test_render_csv_has_lf_and_header():
    records = views_with_counts(1, 1)
    files = render_report({"success": success_rate(records)}, "csv")
    body = files["success.csv"]
    assert "\r" not in body
    assert body.startswith("project,provider_id,")
