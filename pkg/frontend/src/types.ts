// Shapes of the triage-service JSON API (see docs/triage_api.json).

export type VerdictCategory =
  | 'IdenticalToHuman'
  | 'DifferentAppearsCorrect'
  | 'PartialFix'
  | 'EmptyPatch'
  | 'WrongSolution'
  | 'DeletedUnrelatedCode'
  | 'UncompilableUndeclared';

export const CATEGORIES: VerdictCategory[] = [
  'IdenticalToHuman',
  'DifferentAppearsCorrect',
  'PartialFix',
  'EmptyPatch',
  'WrongSolution',
  'DeletedUnrelatedCode',
  'UncompilableUndeclared',
];

export const CORRECT_CATEGORIES: ReadonlySet<VerdictCategory> = new Set([
  'IdenticalToHuman',
  'DifferentAppearsCorrect',
]);

export type TaskStatus = 'pending' | 'reviewed' | 'disputed';

export interface TaskSummary {
  id: string;
  task_id: string;
  provider_id: string;
  project: string;
  kind: string;
  function_name: string;
  suggestion: VerdictCategory | null;
  n_verdicts: number;
  created_at: string;
  status: TaskStatus;
}

export interface Verdict {
  task_id: string;
  provider_id: string;
  reviewer_id: string;
  category: VerdictCategory;
  notes: string;
  timestamp: string;
}

export interface VerificationSummary {
  compile_ok?: boolean;
  issue_counts?: Record<string, number>;
  issue_delta?: Record<string, number>;
  skipped?: string;
}

export interface TaskDetail extends TaskSummary {
  prompt: string;
  message: string;
  context_excerpt: string;
  human_diff: string;
  llm_diff: string;
  verification_summary: VerificationSummary | null;
  test_outcome: string | { skipped: string } | null;
  citations: string[];
  machine_flags: Record<string, unknown>;
  verdicts: Verdict[];
  sealed: boolean;
}

export interface TaskPage {
  items: TaskSummary[];
  total: number;
}

export interface AgreementStats {
  n_double_reviewed: number;
  n_agree: number;
  raw_agreement: number | null;
  per_category_confusion: Record<string, Record<string, number>>;
}
