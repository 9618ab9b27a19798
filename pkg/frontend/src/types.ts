/** Shared types for the annotation client. Mirrors the service wire schema. */

export type Axis =
  | "Accuracy"
  | "Completeness"
  | "CommunicationQuality"
  | "ContextAwareness"
  | "InstructionFollowing";

export interface OracleCriterion {
  criterion_id: string;
  axis: Axis;
  points: number;
  description: string;
}

export interface CasePair {
  model_1: string;
  model_2: string;
  /** Response text keyed by true model id; never rendered under that name. */
  responses: Record<string, string>;
}

export interface AnnotationCase {
  case_id: string;
  cohort: string;
  experiment: string;
  patient_id: string;
  question: string;
  past_timeline: unknown[];
  reference_answer: string;
  reference_reasoning: string;
  candidate_response: string;
  rubric: OracleCriterion[];
  pairs: CasePair[];
  redisplay_pairs?: number[];
}

export type Choice = "m1" | "m2" | "tie";

export interface DisplayAssignment {
  caseId: string;
  pair: [string, string];
  /** True identity of the response rendered in each pane. */
  actualModelA: string;
  actualModelB: string;
  /** Blinded labels, the only names the DOM may carry. */
  displayedAsA: string;
  displayedAsB: string;
  clientSeed: number;
}

export interface CriterionState {
  criterion_id: string;
  axis: Axis;
  points: number;
  description: string;
  oracleDescription: string;
  order: number;
  isNew: boolean;
  isModified: boolean;
  suitable: boolean | null;
  verdict: boolean | null;
  rationale: string;
}

export interface SubmissionRecord {
  key: string;
  is_draft: boolean;
  [field: string]: unknown;
}
