/** Phase-2 blinded A/B preference state machine.
 *
 * Three model pairs per case behind a pill selector; pane placement is
 * randomized client-side per (case, pair) and the mapping persisted with the
 * verdict. Keyboard "1"/"2" choose the left/right pane. Case advance is
 * blocked until all three pairs carry a choice; invalid marks require a
 * free-text reason.
 */

import { assignDisplay } from "./random.js";
import type { AnnotationCase, Choice, DisplayAssignment } from "./types.js";

export class GuardError extends Error {
  constructor(public missing: string[]) {
    super(`incomplete: ${missing.join(", ")}`);
  }
}

export interface PairState {
  model1: string;
  model2: string;
  display: DisplayAssignment;
  choice: Choice | null;
  decisionTimeSeconds: number | null;
  shownAt: number | null;
  isRedisplay: boolean;
}

export type Clock = () => number;

export class Phase2Machine {
  pairs: PairState[];
  activePair = 0;
  isInvalid = false;
  invalidReason: string | null = null;
  finalized = false;
  interactionCount = 0;

  constructor(
    public readonly caseData: AnnotationCase,
    public readonly raterId: string,
    sessionSeed = 0,
    private clock: Clock = () => Date.now() / 1000,
  ) {
    if (caseData.pairs.length !== 3) {
      throw new Error(`phase 2 cases carry exactly three pairs, got ${caseData.pairs.length}`);
    }
    const redisplay = new Set(caseData.redisplay_pairs ?? []);
    this.pairs = caseData.pairs.map((p, i) => ({
      model1: p.model_1,
      model2: p.model_2,
      display: assignDisplay(caseData.case_id, [p.model_1, p.model_2], sessionSeed),
      choice: null,
      decisionTimeSeconds: null,
      shownAt: null,
      isRedisplay: redisplay.has(i),
    }));
    this.showPair(0);
  }

  get submissionKey(): string {
    return `${this.raterId}~${this.caseData.case_id}~ab_clinical_reasoning`;
  }

  /** The reference response is labelled as oracle output, never graded. */
  get referenceDisclaimer(): string {
    return "AI-generated oracle output with full trajectory access. Reference only, not a candidate to grade.";
  }

  showPair(index: number): void {
    if (index < 0 || index >= this.pairs.length) throw new Error(`no pair ${index}`);
    this.activePair = index;
    const pair = this.pairs[index]!;
    if (pair.shownAt === null) pair.shownAt = this.clock();
  }

  private active(): PairState {
    return this.pairs[this.activePair]!;
  }

  /** Response text for a pane, addressed only by its blinded label. */
  paneResponse(pane: "A" | "B"): string {
    const pair = this.active();
    const actual = pane === "A" ? pair.display.actualModelA : pair.display.actualModelB;
    const original = this.caseData.pairs[this.activePair]!;
    return original.responses[actual] ?? "";
  }

  choose(choice: Choice): void {
    if (this.finalized) throw new Error("submission already finalized");
    const pair = this.active();
    pair.choice = choice;
    pair.decisionTimeSeconds = Math.max(0, this.clock() - (pair.shownAt ?? this.clock()));
    this.interactionCount += 1;
  }

  /** Keyboard shortcuts: "1" prefers pane A, "2" prefers pane B. */
  handleKey(key: string): boolean {
    if (key !== "1" && key !== "2") return false;
    const pair = this.active();
    const chosenModel = key === "1" ? pair.display.actualModelA : pair.display.actualModelB;
    this.choose(chosenModel === pair.model1 ? "m1" : "m2");
    return true;
  }

  chooseTie(): void {
    this.choose("tie");
  }

  missingPairs(): string[] {
    return this.pairs.flatMap((p, i) => (p.choice === null ? [`pair${i + 1}`] : []));
  }

  get canAdvance(): boolean {
    return this.missingPairs().length === 0;
  }

  markInvalid(reason: string): void {
    if (!reason.trim()) throw new GuardError(["invalid_reason"]);
    this.isInvalid = true;
    this.invalidReason = reason;
    this.interactionCount += 1;
  }

  buildSubmission(): Record<string, unknown> {
    return {
      rater_id: this.raterId,
      experiment_id: this.caseData.experiment,
      patient_id: this.caseData.patient_id,
      sample_id: this.caseData.case_id,
      submission_type: "ab_clinical_reasoning",
      cohort: this.caseData.cohort,
      is_invalid: this.isInvalid,
      invalid_reason: this.invalidReason,
      results_metadata: { interaction_count: this.interactionCount },
      payload: {
        pairs: this.pairs.map((p, i) => {
          const original = this.caseData.pairs[i]!;
          return {
            model_1: p.model1,
            model_2: p.model2,
            choice: p.choice,
            display: {
              actualModelA: p.display.actualModelA,
              actualModelB: p.display.actualModelB,
              displayedAsA: p.display.displayedAsA,
              displayedAsB: p.display.displayedAsB,
            },
            client_seed: p.display.clientSeed,
            lengths: [
              (original.responses[p.model1] ?? "").length,
              (original.responses[p.model2] ?? "").length,
            ],
            decision_time_seconds: p.decisionTimeSeconds,
            is_redisplay: p.isRedisplay,
          };
        }),
      },
    };
  }

  finalizeGuard(): void {
    const missing = this.missingPairs();
    if (this.isInvalid && !(this.invalidReason ?? "").trim()) missing.push("invalid_reason");
    if (missing.length) throw new GuardError(missing);
  }

  markFinalized(): void {
    this.finalizeGuard();
    this.finalized = true;
  }
}
