// Browser bootstrap: queue navigation, record view, verdict entry with
// keyboard shortcuts (digits 1-7), blind-mode toggle, agreement dashboard.

import { ApiClient, ConflictError, SealedError, ServiceUnavailableError } from './api.js';
import {
  renderAgreement,
  renderBadges,
  renderCategoryButtons,
  renderDiff,
  renderEmptyQueue,
  renderExistingVerdictNotice,
  renderQueueItem,
  renderVerdicts,
  escapeHtml,
} from './render.js';
import { CATEGORIES } from './types.js';
import type { TaskDetail, TaskStatus, VerdictCategory } from './types.js';

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

interface UiState {
  client: ApiClient | null;
  reviewerId: string;
  statusFilter: TaskStatus;
  blindMode: boolean;
  currentId: string | null;
  currentDetail: TaskDetail | null;
}

const state: UiState = {
  client: null,
  reviewerId: '',
  statusFilter: 'pending',
  blindMode: false,
  currentId: null,
  currentDetail: null,
};

function banner(message: string, retry?: () => void): void {
  const el = $('banner');
  el.innerHTML = escapeHtml(message) + (retry ? ' <button id="retry">retry</button>' : '');
  el.classList.remove('hidden');
  if (retry) document.getElementById('retry')?.addEventListener('click', retry);
}

function clearBanner(): void {
  $('banner').classList.add('hidden');
}

async function loadQueue(): Promise<void> {
  if (!state.client) return;
  try {
    const page = await state.client.fetchQueue(state.statusFilter);
    clearBanner();
    const list = $('queue');
    if (!page.items.length) {
      list.innerHTML = renderEmptyQueue(state.statusFilter);
      return;
    }
    list.innerHTML = `<ul>${page.items.map(renderQueueItem).join('')}</ul>`;
    for (const li of list.querySelectorAll<HTMLElement>('.queue-item')) {
      li.addEventListener('click', () => openRecord(li.dataset.id!));
    }
  } catch (err) {
    if (err instanceof ServiceUnavailableError) {
      banner('Triage service unreachable.', loadQueue);
    } else {
      banner(String(err));
    }
  }
}

async function openRecord(id: string): Promise<void> {
  if (!state.client) return;
  try {
    const detail = await state.client.fetchDetail(id);
    state.currentId = id;
    state.currentDetail = detail;
    renderRecord(detail);
  } catch (err) {
    banner(String(err));
  }
}

function renderRecord(detail: TaskDetail): void {
  $('record').classList.remove('hidden');
  $('record-title').textContent = detail.id;
  $('record-message').textContent = detail.message;
  $('record-prompt').textContent = detail.prompt;
  $('badges').innerHTML = renderBadges(
    detail.verification_summary,
    detail.test_outcome,
    state.blindMode,
  );
  $('diffs').innerHTML =
    renderDiff(detail.human_diff, 'Human patch') + renderDiff(detail.llm_diff, 'LLM patch');
  $('verdicts').innerHTML = renderVerdicts(detail);
  $('categories').innerHTML = detail.sealed
    ? '<div class="conflict">Campaign sealed — verdicts are read-only.</div>'
    : renderCategoryButtons(detail.suggestion);
  $('conflict-notice').innerHTML = '';
  if (!detail.sealed) {
    for (const button of $('categories').querySelectorAll<HTMLElement>('button.category')) {
      button.addEventListener('click', () =>
        submit(button.dataset.category as VerdictCategory),
      );
    }
  }
  const citations = detail.citations.length
    ? `<h3>Citations</h3><ul>${detail.citations
        .map((c) => `<li class="mono">${escapeHtml(c)}</li>`)
        .join('')}</ul>`
    : '';
  $('citations').innerHTML = citations;
}

async function submit(category: VerdictCategory): Promise<void> {
  if (!state.client || !state.currentId) return;
  const notes = ($('notes') as HTMLTextAreaElement).value;
  try {
    await state.client.submitVerdict(state.currentId, state.reviewerId, category, notes);
    ($('notes') as HTMLTextAreaElement).value = '';
    await openRecord(state.currentId);
    await loadQueue();
  } catch (err) {
    if (err instanceof ConflictError) {
      $('conflict-notice').innerHTML = renderExistingVerdictNotice(err.existing);
    } else if (err instanceof SealedError) {
      $('conflict-notice').innerHTML =
        '<div class="conflict">Campaign sealed — input disabled.</div>';
    } else {
      banner(String(err));
    }
  }
}

async function loadAgreement(): Promise<void> {
  if (!state.client) return;
  try {
    const stats = await state.client.agreement();
    $('agreement').innerHTML = renderAgreement(stats);
  } catch (err) {
    banner(String(err));
  }
}

function connect(): void {
  const reviewer = ($('reviewer') as HTMLInputElement).value.trim();
  if (!reviewer) {
    banner('Enter a reviewer id first.');
    return;
  }
  const token = ($('token') as HTMLInputElement).value.trim() || null;
  state.reviewerId = reviewer;
  state.client = new ApiClient(window.location.origin, token);
  $('login').classList.add('hidden');
  $('main').classList.remove('hidden');
  void loadQueue();
  void loadAgreement();
}

function wireEvents(): void {
  $('connect').addEventListener('click', connect);
  $('status-filter').addEventListener('change', (ev) => {
    state.statusFilter = (ev.target as HTMLSelectElement).value as TaskStatus;
    void loadQueue();
  });
  $('blind-toggle').addEventListener('change', (ev) => {
    state.blindMode = (ev.target as HTMLInputElement).checked;
    if (state.currentDetail) renderRecord(state.currentDetail);
  });
  $('refresh').addEventListener('click', () => {
    void loadQueue();
    void loadAgreement();
  });
  document.addEventListener('keydown', (ev) => {
    if ((ev.target as HTMLElement).tagName === 'TEXTAREA') return;
    if ((ev.target as HTMLElement).tagName === 'INPUT') return;
    const digit = Number(ev.key);
    if (digit >= 1 && digit <= CATEGORIES.length && state.currentId) {
      void submit(CATEGORIES[digit - 1]);
    }
  });
}

document.addEventListener('DOMContentLoaded', wireEvents);
