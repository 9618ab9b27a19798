/** Phase-1 rubric curation and grading state machine.
 *
 * Step 1 edits the rubric with the candidate response hidden; a submit guard
 * blocks Step 2 until every criterion carries an explicit Suitable verdict.
 * Step 2 locks the rubric, reveals the candidate, and collects
 * Accurate/Not-Accurate verdicts plus rationales. Every mutating edit bumps
 * the interaction counter that is persisted as an effort proxy.
 */

import type { AnnotationCase, Axis, CriterionState } from "./types.js";

export type Phase1Step = "step1" | "step2";

export class GuardError extends Error {
  constructor(public missing: string[]) {
    super(`incomplete: ${missing.join(", ")}`);
  }
}

export class Phase1Machine {
  step: Phase1Step = "step1";
  criteria: CriterionState[] = [];
  interactionCount = 0;
  isInvalid = false;
  invalidReason: string | null = null;
  finalized = false;
  private addedCounter = 0;
  private oracleVerdicts: Record<string, boolean>;

  constructor(
    public readonly caseData: AnnotationCase,
    public readonly raterId: string,
  ) {
    this.criteria = caseData.rubric.map((c, i) => ({
      criterion_id: c.criterion_id,
      axis: c.axis,
      points: c.points,
      description: c.description,
      oracleDescription: c.description,
      order: i,
      isNew: false,
      isModified: false,
      suitable: null,
      verdict: null,
      rationale: "",
    }));
    this.oracleVerdicts =
      (caseData as unknown as { oracle_verdicts?: Record<string, boolean> }).oracle_verdicts ?? {};
  }

  get submissionKey(): string {
    return `${this.raterId}~${this.caseData.case_id}~clinical_reasoning`;
  }

  /** The candidate response is hidden during Step 1 by design. */
  get candidateVisible(): boolean {
    return this.step === "step2";
  }

  private touch(): void {
    this.interactionCount += 1;
  }

  private find(criterionId: string): CriterionState {
    const crit = this.criteria.find((c) => c.criterion_id === criterionId);
    if (!crit) throw new Error(`no criterion ${criterionId}`);
    return crit;
  }

  private assertStep(step: Phase1Step): void {
    if (this.step !== step) throw new Error(`operation only valid in ${step}`);
    if (this.finalized) throw new Error("submission already finalized");
  }

  // -- step 1: rubric curation ------------------------------------------------

  toggleSuitable(criterionId: string, suitable: boolean): void {
    this.assertStep("step1");
    this.find(criterionId).suitable = suitable;
    this.touch();
  }

  editDescription(criterionId: string, description: string): void {
    this.assertStep("step1");
    const crit = this.find(criterionId);
    crit.description = description;
    if (!crit.isNew) crit.isModified = description !== crit.oracleDescription;
    this.touch();
  }

  /** Reset-to-oracle is only offered on modified oracle-authored criteria. */
  canReset(criterionId: string): boolean {
    const crit = this.find(criterionId);
    return crit.isModified && !crit.isNew;
  }

  resetToOracle(criterionId: string): void {
    this.assertStep("step1");
    if (!this.canReset(criterionId)) throw new Error("reset only applies to modified criteria");
    const crit = this.find(criterionId);
    crit.description = crit.oracleDescription;
    crit.isModified = false;
    this.touch();
  }

  move(criterionId: string, direction: -1 | 1): void {
    this.assertStep("step1");
    const idx = this.criteria.findIndex((c) => c.criterion_id === criterionId);
    const target = idx + direction;
    if (idx < 0 || target < 0 || target >= this.criteria.length) return;
    const [crit] = this.criteria.splice(idx, 1);
    this.criteria.splice(target, 0, crit!);
    this.criteria.forEach((c, i) => (c.order = i));
    this.touch();
  }

  /** Delete is only offered on clinician-added criteria. */
  canDelete(criterionId: string): boolean {
    return this.find(criterionId).isNew;
  }

  remove(criterionId: string): void {
    this.assertStep("step1");
    if (!this.canDelete(criterionId)) {
      throw new Error("only clinician-added criteria can be deleted");
    }
    this.criteria = this.criteria.filter((c) => c.criterion_id !== criterionId);
    this.criteria.forEach((c, i) => (c.order = i));
    this.touch();
  }

  addCriterion(axis: Axis, description: string, points = 5): CriterionState {
    this.assertStep("step1");
    this.addedCounter += 1;
    const crit: CriterionState = {
      criterion_id: `${this.raterId}-new${this.addedCounter}`,
      axis,
      points,
      description,
      oracleDescription: description,
      order: this.criteria.length,
      isNew: true,
      isModified: false,
      suitable: null,
      verdict: null,
      rationale: "",
    };
    this.criteria.push(crit);
    this.touch();
    return crit;
  }

  /** Criteria still lacking an explicit Suitable/Not-Suitable verdict. */
  step1Missing(): string[] {
    return this.criteria.filter((c) => c.suitable === null).map((c) => c.criterion_id);
  }

  advanceToStep2(): void {
    this.assertStep("step1");
    const missing = this.step1Missing();
    if (missing.length) throw new GuardError(missing);
    this.step = "step2";
  }

  // -- step 2: grading ----------------------------------------------------------

  retained(): CriterionState[] {
    return this.criteria.filter((c) => c.suitable === true);
  }

  setVerdict(criterionId: string, verdict: boolean): void {
    this.assertStep("step2");
    const crit = this.find(criterionId);
    if (crit.suitable !== true) throw new Error("verdicts apply to retained criteria only");
    crit.verdict = verdict;
    this.touch();
  }

  setRationale(criterionId: string, rationale: string): void {
    this.assertStep("step2");
    this.find(criterionId).rationale = rationale;
    this.touch();
  }

  /** Helper text shown on negative-point criteria in Step 2. */
  negativeCriterionHelp(criterionId: string): string | null {
    const crit = this.find(criterionId);
    if (crit.points >= 0) return null;
    return "For negative criteria, mark Accurate if the statement is true.";
  }

  /** Pre-submit back-navigation; rubric edits resume, grading pauses. */
  backToStep1(): void {
    this.assertStep("step2");
    this.step = "step1";
  }

  /** Verdicts recorded for criteria later removed or marked unsuitable are
   * discarded when grading resumes. */
  resumeStep2(): void {
    this.assertStep("step1");
    const missing = this.step1Missing();
    if (missing.length) throw new GuardError(missing);
    for (const crit of this.criteria) {
      if (crit.suitable !== true) {
        crit.verdict = null;
        crit.rationale = "";
      }
    }
    this.step = "step2";
  }

  step2Missing(): string[] {
    return this.retained()
      .filter((c) => c.verdict === null)
      .map((c) => c.criterion_id);
  }

  markInvalid(reason: string): void {
    if (!reason.trim()) throw new GuardError(["invalid_reason"]);
    this.isInvalid = true;
    this.invalidReason = reason;
    this.touch();
  }

  clearInvalid(): void {
    this.isInvalid = false;
    this.invalidReason = null;
    this.touch();
  }

  buildSubmission(): Record<string, unknown> {
    return {
      rater_id: this.raterId,
      experiment_id: this.caseData.experiment,
      patient_id: this.caseData.patient_id,
      sample_id: this.caseData.case_id,
      submission_type: "clinical_reasoning",
      cohort: this.caseData.cohort,
      is_invalid: this.isInvalid,
      invalid_reason: this.invalidReason,
      results_metadata: { interaction_count: this.interactionCount },
      payload: {
        criteria: this.criteria.map((c) => ({
          criterion_id: c.criterion_id,
          axis: c.axis,
          points: c.points,
          order: c.order,
          is_new: c.isNew,
          is_modified: c.isModified,
          suitable: c.suitable,
          verdict: c.verdict,
          rationale: c.rationale,
          oracle_verdict: c.isNew ? null : (this.oracleVerdicts[c.criterion_id] ?? null),
        })),
      },
    };
  }

  /** Local finalize guard mirroring the server's: explicit suitability
   * everywhere, verdicts on every retained criterion. */
  finalizeGuard(): void {
    const missing = [...this.step1Missing(), ...this.step2Missing()];
    if (this.isInvalid && !(this.invalidReason ?? "").trim()) missing.push("invalid_reason");
    if (missing.length) throw new GuardError(missing);
  }

  markFinalized(): void {
    this.finalizeGuard();
    this.finalized = true;
  }
}
