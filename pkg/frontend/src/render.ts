// Pure HTML renderers: given record data, produce markup strings. Kept free
// of DOM access so they are unit-testable under node and snapshot-stable.

import { CATEGORIES, CORRECT_CATEGORIES } from './types.js';
import type {
  AgreementStats,
  TaskDetail,
  TaskSummary,
  VerdictCategory,
  VerificationSummary,
} from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function formatPercent(ratio: number | null): string {
  if (ratio === null) return '–';
  const pct = ratio * 100;
  const rounded = Math.round(pct * 10) / 10;
  return Number.isInteger(rounded) ? `${rounded}%` : `${rounded.toFixed(1)}%`;
}

// Unified diff -> table rows with add/del/context classes. The markup is a
// pure function of the diff text, so stored records always render the same.
export function renderDiff(diffText: string, title: string): string {
  const rows: string[] = [];
  for (const line of diffText.split('\n')) {
    if (line === '' || line.startsWith('+++') || line.startsWith('---')) continue;
    let cls = 'ctx';
    if (line.startsWith('@@')) cls = 'hunk';
    else if (line.startsWith('+')) cls = 'add';
    else if (line.startsWith('-')) cls = 'del';
    rows.push(`<tr class="${cls}"><td>${escapeHtml(line)}</td></tr>`);
  }
  const body = rows.length
    ? rows.join('')
    : '<tr class="ctx"><td>(no textual change)</td></tr>';
  return (
    `<div class="diff"><h3>${escapeHtml(title)}</h3>` +
    `<table class="diff-table">${body}</table></div>`
  );
}

export function renderBadges(
  verification: VerificationSummary | null,
  testOutcome: TaskDetail['test_outcome'],
  blindMode: boolean,
): string {
  if (blindMode) {
    return '<div class="badges blind">verification and test outcomes hidden (blind mode)</div>';
  }
  const badges: string[] = [];
  if (verification?.skipped) {
    badges.push(`<span class="badge skip">verification: ${escapeHtml(verification.skipped)}</span>`);
  } else if (verification) {
    const compile = verification.compile_ok ? 'compile ok' : 'compile error';
    badges.push(`<span class="badge ${verification.compile_ok ? 'good' : 'bad'}">${compile}</span>`);
    for (const [category, count] of Object.entries(verification.issue_counts ?? {})) {
      badges.push(`<span class="badge issue">${escapeHtml(category)}: ${count}</span>`);
    }
  }
  if (typeof testOutcome === 'string') {
    const cls = testOutcome === 'pass' ? 'good' : 'bad';
    badges.push(`<span class="badge ${cls}">tests: ${escapeHtml(testOutcome)}</span>`);
  } else if (testOutcome && 'skipped' in testOutcome) {
    badges.push(`<span class="badge skip">tests: ${escapeHtml(testOutcome.skipped)}</span>`);
  }
  return `<div class="badges">${badges.join(' ')}</div>`;
}

export function renderQueueItem(item: TaskSummary): string {
  const suggestion = item.suggestion
    ? `<span class="suggestion">suggested: ${escapeHtml(item.suggestion)}</span>`
    : '';
  return (
    `<li class="queue-item" data-id="${escapeHtml(item.id)}">` +
    `<span class="mono">${escapeHtml(item.id)}</span>` +
    `<span class="kind">${escapeHtml(item.kind)}</span>` +
    `<span class="fn mono">${escapeHtml(item.function_name)}</span>` +
    `<span class="status ${item.status}">${item.status}</span>` +
    suggestion +
    `</li>`
  );
}

export function renderEmptyQueue(status: string): string {
  return `<div class="empty-state">No ${escapeHtml(status)} items.</div>`;
}

export function renderCategoryButtons(suggestion: VerdictCategory | null): string {
  return CATEGORIES.map((category, index) => {
    const suggested = category === suggestion ? ' suggested' : '';
    const band = CORRECT_CATEGORIES.has(category) ? 'correct' : 'incorrect';
    return (
      `<button class="category ${band}${suggested}" data-category="${category}">` +
      `<kbd>${index + 1}</kbd> ${category}` +
      (suggested ? ' <em>(suggestion)</em>' : '') +
      `</button>`
    );
  }).join('');
}

export function renderVerdicts(detail: TaskDetail): string {
  if (!detail.verdicts.length) return '<div class="verdicts">No verdicts yet.</div>';
  const rows = detail.verdicts
    .map(
      (v) =>
        `<tr><td>${escapeHtml(v.reviewer_id)}</td><td class="${
          CORRECT_CATEGORIES.has(v.category) ? 'correct' : 'incorrect'
        }">${v.category}</td><td>${escapeHtml(v.notes)}</td></tr>`,
    )
    .join('');
  return (
    '<table class="verdicts"><tr><th>reviewer</th><th>category</th><th>notes</th></tr>' +
    rows +
    '</table>'
  );
}

export function renderExistingVerdictNotice(verdict: {
  reviewer_id: string;
  category: string;
} | null): string {
  if (!verdict) return '<div class="conflict">A verdict already exists for this reviewer.</div>';
  return (
    `<div class="conflict">Already judged by <b>${escapeHtml(verdict.reviewer_id)}</b> as ` +
    `<b>${escapeHtml(verdict.category)}</b> — shown read-only.</div>`
  );
}

export function renderAgreement(stats: AgreementStats): string {
  if (stats.n_double_reviewed === 0) {
    return '<div class="empty-state">no double-reviewed items yet</div>';
  }
  const headline = `<div class="headline">${formatPercent(stats.raw_agreement)}</div>`;
  const sub = `<div class="sub">${stats.n_agree} of ${stats.n_double_reviewed} double-reviewed records agree</div>`;
  const max = Math.max(
    1,
    ...CATEGORIES.flatMap((row) => CATEGORIES.map((col) => stats.per_category_confusion[row]?.[col] ?? 0)),
  );
  const header = '<tr><th></th>' + CATEGORIES.map((c) => `<th title="${c}">${shortLabel(c)}</th>`).join('') + '</tr>';
  const body = CATEGORIES.map((row) => {
    const cells = CATEGORIES.map((col) => {
      const count = stats.per_category_confusion[row]?.[col] ?? 0;
      const heat = count === 0 ? 0 : Math.max(1, Math.round((count / max) * 4));
      return `<td class="heat-${heat}" title="${row} / ${col}">${count || ''}</td>`;
    }).join('');
    return `<tr><th title="${row}">${shortLabel(row)}</th>${cells}</tr>`;
  }).join('');
  return (
    headline + sub + `<table class="confusion">${header}${body}</table>`
  );
}

function shortLabel(category: string): string {
  return category.replace(/[a-z]/g, '');
}
