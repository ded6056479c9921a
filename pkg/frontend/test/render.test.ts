import assert from 'node:assert/strict';
import { test } from 'node:test';

import {
  escapeHtml,
  formatPercent,
  renderAgreement,
  renderBadges,
  renderCategoryButtons,
  renderDiff,
  renderEmptyQueue,
  renderExistingVerdictNotice,
  renderQueueItem,
} from '../src/render.js';
import type { AgreementStats, TaskSummary } from '../src/types.js';

test('escapeHtml neutralizes markup', () => {
  assert.equal(escapeHtml('<b>&"x"</b>'), '&lt;b&gt;&amp;&quot;x&quot;&lt;/b&gt;');
});

test('formatPercent', () => {
  assert.equal(formatPercent(1), '100%');
  assert.equal(formatPercent(0.7), '70%');
  assert.equal(formatPercent(0.299), '29.9%');
  assert.equal(formatPercent(null), '–');
});

// Golden snapshot: diff markup is a pure function of the stored diff text.
const DIFF_TEXT = [
  '--- a/f.c',
  '+++ b/f.c',
  '@@ -1,3 +1,3 @@',
  ' int f(void) {',
  '-    return deque->buffer[index];',
  '+    return deque->buffer[p];',
].join('\n');

const DIFF_GOLDEN =
  '<div class="diff"><h3>LLM patch</h3><table class="diff-table">' +
  '<tr class="hunk"><td>@@ -1,3 +1,3 @@</td></tr>' +
  '<tr class="ctx"><td> int f(void) {</td></tr>' +
  '<tr class="del"><td>-    return deque-&gt;buffer[index];</td></tr>' +
  '<tr class="add"><td>+    return deque-&gt;buffer[p];</td></tr>' +
  '</table></div>';

test('renderDiff matches the golden snapshot', () => {
  assert.equal(renderDiff(DIFF_TEXT, 'LLM patch'), DIFF_GOLDEN);
  assert.equal(renderDiff(DIFF_TEXT, 'LLM patch'), renderDiff(DIFF_TEXT, 'LLM patch'));
});

test('renderDiff empty diff shows a placeholder row', () => {
  assert.match(renderDiff('', 'Human patch'), /no textual change/);
});

test('renderBadges hides outcomes in blind mode', () => {
  const html = renderBadges(
    { compile_ok: true, issue_counts: { UseAfterFree: 1 } },
    'pass',
    true,
  );
  assert.match(html, /blind mode/);
  assert.doesNotMatch(html, /UseAfterFree/);
  assert.doesNotMatch(html, /pass/);
});

test('renderBadges shows compile, issues and tests otherwise', () => {
  const html = renderBadges(
    { compile_ok: false, issue_counts: { UndeclaredIdentifier: 2 } },
    { skipped: 'compile-error' },
    false,
  );
  assert.match(html, /compile error/);
  assert.match(html, /UndeclaredIdentifier: 2/);
  assert.match(html, /tests: compile-error/);
});

test('renderQueueItem marks suggestion distinctly from verdicts', () => {
  const item: TaskSummary = {
    id: 'deque-123--sim_correct',
    task_id: 'deque-123',
    provider_id: 'sim_correct',
    project: 'deque',
    kind: 'bug-fix',
    function_name: 'deque_remove_at',
    suggestion: 'IdenticalToHuman',
    n_verdicts: 0,
    created_at: '2025-01-01T00:00:00Z',
    status: 'pending',
  };
  const html = renderQueueItem(item);
  assert.match(html, /suggested: IdenticalToHuman/);
  assert.match(html, /class="suggestion"/);
});

test('renderEmptyQueue', () => {
  assert.match(renderEmptyQueue('pending'), /No pending items/);
});

test('renderCategoryButtons numbers all seven categories', () => {
  const html = renderCategoryButtons('EmptyPatch');
  for (let i = 1; i <= 7; i++) assert.match(html, new RegExp(`<kbd>${i}</kbd>`));
  assert.match(html, /suggested" data-category="EmptyPatch"/);
  const buttons = html.match(/<button/g) ?? [];
  assert.equal(buttons.length, 7);
});

test('renderExistingVerdictNotice shows the earlier verdict read-only', () => {
  const html = renderExistingVerdictNotice({ reviewer_id: 'r1', category: 'EmptyPatch' });
  assert.match(html, /r1/);
  assert.match(html, /EmptyPatch/);
  assert.match(html, /read-only/);
});

function agreement(nDouble: number, nAgree: number): AgreementStats {
  return {
    n_double_reviewed: nDouble,
    n_agree: nAgree,
    raw_agreement: nDouble ? nAgree / nDouble : null,
    per_category_confusion: {
      IdenticalToHuman: { IdenticalToHuman: nAgree, WrongSolution: nDouble - nAgree },
    },
  };
}

test('agreement dashboard renders 100% headline', () => {
  assert.match(renderAgreement(agreement(10, 10)), /100%/);
});

test('agreement dashboard renders 70% for 7 of 10', () => {
  const html = renderAgreement(agreement(10, 7));
  assert.match(html, /70%/);
  assert.match(html, /7 of 10/);
});

test('agreement dashboard empty state', () => {
  assert.match(renderAgreement(agreement(0, 0)), /no double-reviewed items yet/);
});
