// REST client for the triage service. The UI mutates server state through
// submitVerdict only; every other call is a read.

import type {
  AgreementStats,
  TaskDetail,
  TaskPage,
  TaskStatus,
  Verdict,
  VerdictCategory,
} from './types.js';

export class ConflictError extends Error {
  existing: Verdict | null;

  constructor(message: string, existing: Verdict | null) {
    super(message);
    this.name = 'ConflictError';
    this.existing = existing;
  }
}

export class SealedError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'SealedError';
  }
}

export class ServiceUnavailableError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ServiceUnavailableError';
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string | null = null,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers: this.headers(),
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceUnavailableError(`triage service unreachable: ${err}`);
    }
    const payload = await response.json().catch(() => ({}));
    if (response.status === 409) {
      throw new ConflictError(payload.error ?? 'conflict', payload.existing ?? null);
    }
    if (response.status === 423) {
      throw new SealedError(payload.error ?? 'campaign sealed');
    }
    if (!response.ok) {
      throw new Error(payload.error ?? `HTTP ${response.status}`);
    }
    return payload as T;
  }

  fetchQueue(status?: TaskStatus, offset = 0, limit = 50): Promise<TaskPage> {
    const params = new URLSearchParams();
    if (status) params.set('status', status);
    params.set('offset', String(offset));
    params.set('limit', String(limit));
    return this.request<TaskPage>('GET', `/tasks?${params}`);
  }

  fetchDetail(id: string): Promise<TaskDetail> {
    return this.request<TaskDetail>('GET', `/tasks/${encodeURIComponent(id)}`);
  }

  submitVerdict(
    id: string,
    reviewerId: string,
    category: VerdictCategory,
    notes = '',
  ): Promise<{ stored: Verdict }> {
    return this.request('POST', `/tasks/${encodeURIComponent(id)}/verdicts`, {
      reviewer_id: reviewerId,
      category,
      notes,
    });
  }

  agreement(): Promise<AgreementStats> {
    return this.request<AgreementStats>('GET', '/agreement');
  }

  campaignState(): Promise<{ sealed: boolean }> {
    return this.request('GET', '/campaign');
  }
}
