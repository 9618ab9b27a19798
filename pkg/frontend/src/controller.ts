/** Draft synchronization between the machines and the annotation service. */

import { ApiClient } from "./api.js";
import { Phase1Machine } from "./phase1.js";
import { Phase2Machine } from "./phase2.js";
import type { AnnotationCase, Choice, CriterionState } from "./types.js";

/** Push the current machine state as a draft; server keeps last writer. */
export async function saveDraft(
  api: ApiClient,
  machine: Phase1Machine | Phase2Machine,
): Promise<void> {
  await api.putDraft(machine.buildSubmission());
}

/** Finalize via local guard first so the server 409 is never the first signal. */
export async function finalize(
  api: ApiClient,
  machine: Phase1Machine | Phase2Machine,
): Promise<void> {
  machine.finalizeGuard();
  await saveDraft(api, machine);
  await api.finalize(machine.submissionKey);
  machine.markFinalized();
}

/** Rehydrate a Phase-1 machine from a server-side draft after a reload. */
export async function restorePhase1(
  api: ApiClient,
  caseData: AnnotationCase,
  raterId: string,
): Promise<Phase1Machine> {
  const machine = new Phase1Machine(caseData, raterId);
  const draft = await api.getDraft(machine.submissionKey);
  if (!draft || !draft.is_draft) return machine;
  const payload = draft.payload as { criteria: Record<string, unknown>[] };
  const byId = new Map(machine.criteria.map((c) => [c.criterion_id, c]));
  const restored: CriterionState[] = [];
  for (const raw of payload.criteria) {
    const id = String(raw.criterion_id);
    let crit = byId.get(id);
    if (!crit) {
      crit = {
        criterion_id: id,
        axis: raw.axis as CriterionState["axis"],
        points: Number(raw.points),
        description: "",
        oracleDescription: "",
        order: 0,
        isNew: true,
        isModified: false,
        suitable: null,
        verdict: null,
        rationale: "",
      };
    }
    crit.order = Number(raw.order ?? restored.length);
    crit.isModified = Boolean(raw.is_modified);
    crit.suitable = (raw.suitable ?? null) as boolean | null;
    crit.verdict = (raw.verdict ?? null) as boolean | null;
    crit.rationale = String(raw.rationale ?? "");
    restored.push(crit);
  }
  machine.criteria = restored.sort((a, b) => a.order - b.order);
  machine.interactionCount = Number(
    (draft.results_metadata as { interaction_count?: number })?.interaction_count ?? 0,
  );
  return machine;
}

/** Rehydrate a Phase-2 machine; display assignments re-derive from the seed. */
export async function restorePhase2(
  api: ApiClient,
  caseData: AnnotationCase,
  raterId: string,
  sessionSeed = 0,
): Promise<Phase2Machine> {
  const machine = new Phase2Machine(caseData, raterId, sessionSeed);
  const draft = await api.getDraft(machine.submissionKey);
  if (!draft || !draft.is_draft) return machine;
  const payload = draft.payload as { pairs: Record<string, unknown>[] };
  payload.pairs.forEach((raw, i) => {
    const pair = machine.pairs[i];
    if (!pair) return;
    pair.choice = (raw.choice ?? null) as Choice | null;
    pair.decisionTimeSeconds = (raw.decision_time_seconds ?? null) as number | null;
  });
  machine.interactionCount = Number(
    (draft.results_metadata as { interaction_count?: number })?.interaction_count ?? 0,
  );
  return machine;
}
