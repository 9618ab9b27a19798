/** End-to-end: UI machines -> live annotation service -> export -> stats CLI.
 *
 * Spawns the Python service and drives two raters through full Phase-2 cases
 * (three pairs each), plus a Phase-1 case, entirely through the HTTP API.
 * The exported rows then flow through the `stats` subcommand and the bucket
 * counts are checked against the constructed consensus pattern.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { finalize, restorePhase1, restorePhase2, saveDraft } from "../src/controller.js";
import { Phase1Machine } from "../src/phase1.js";
import { Phase2Machine } from "../src/phase2.js";
import type { AnnotationCase, Choice } from "../src/types.js";

const PORT = 18771 + Math.floor(Math.random() * 1000);
const BASE = `http://127.0.0.1:${PORT}`;

function abCase(caseNo: number): Record<string, unknown> {
  const pairs = ["gpt5", "huatuo", "qwen"].map((opponent) => ({
    model_1: "ours",
    model_2: opponent,
    responses: {
      ours: `our detailed plan for case ${caseNo} versus ${opponent}`.repeat(4),
      [opponent]: `the ${opponent} plan for case ${caseNo}`,
    },
  }));
  return {
    case_id: `ab-case-${caseNo}`,
    cohort: "spine",
    experiment: "exp-rt",
    patient_id: `patient-${caseNo}`,
    question: "Which plan is better?",
    past_timeline: [{ time: "2120-03-01T08:00:00", source: "labevents", data: {} }],
    reference_answer: "Escalate imaging.",
    reference_reasoning: "The trajectory shows it.",
    candidate_response: "",
    rubric: [],
    pairs,
  };
}

function rubricCase(): Record<string, unknown> {
  return {
    case_id: "rubric-case-0",
    cohort: "spine",
    experiment: "exp-rt",
    patient_id: "patient-r",
    question: "Next diagnostic step?",
    past_timeline: [{ time: "2120-03-01T08:00:00", source: "labevents", data: {} }],
    reference_answer: "MRI lumbar spine.",
    reference_reasoning: "Red flags in the past timeline.",
    candidate_response: "Order MRI and reassess.",
    rubric: [
      { criterion_id: "c1", axis: "Accuracy", points: 7, description: "Names the right study." },
      { criterion_id: "c2", axis: "Completeness", points: 5, description: "Mentions reassessment." },
      { criterion_id: "c3", axis: "CommunicationQuality", points: 3, description: "Clear structure." },
      { criterion_id: "c4", axis: "ContextAwareness", points: 6, description: "Cites the red flags." },
      { criterion_id: "c5", axis: "InstructionFollowing", points: 2, description: "Reasoning then answer." },
    ],
    oracle_verdicts: { c1: true, c2: true, c3: true, c4: false, c5: true },
    pairs: [],
  };
}

let service: ChildProcess;
let dataDir: string;

async function waitForService(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/cases`, {
        headers: { Authorization: "Bearer tok-r1" },
      });
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("annotation service did not come up");
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "annotation-rt-"));
  const cases = [rubricCase(), abCase(0), abCase(1), abCase(2), abCase(3)];
  writeFileSync(join(dataDir, "cases.jsonl"), cases.map((c) => JSON.stringify(c)).join("\n"));
  writeFileSync(
    join(dataDir, "tokens.json"),
    JSON.stringify({ "tok-r1": "r1", "tok-r2": "r2" }),
  );
  service = spawn(
    "python3",
    ["-m", "wardbench.cli", "serve", "--port", String(PORT), "--data-dir", dataDir,
     "--tokens-file", join(dataDir, "tokens.json")],
    { stdio: "ignore" },
  );
  await waitForService();
}, 30_000);

afterAll(() => {
  service?.kill();
});

async function submitPhase2(
  api: ApiClient,
  caseData: AnnotationCase,
  rater: string,
  choices: [Choice, Choice, Choice],
): Promise<void> {
  const machine = new Phase2Machine(caseData, rater);
  for (let i = 0; i < 3; i++) {
    machine.showPair(i);
    machine.choose(choices[i]!);
    await saveDraft(api, machine);
  }
  await finalize(api, machine);
}

describe("service round trip", () => {
  it("drives phase 2 for both raters and reproduces bucket counts via stats", async () => {
    const r1 = new ApiClient(BASE, "tok-r1");
    const r2 = new ApiClient(BASE, "tok-r2");
    const cases = await r1.getCases({ cohort: "spine" });
    const abCases = cases.filter((c) => c.case_id.startsWith("ab-case-"));
    expect(abCases).toHaveLength(4);

    // constructed consensus pattern on the "ours vs gpt5" pair (pair 1):
    //   case0 strict, case1 semi, case2 single-rater, case3 non-consensus;
    // the other two pairs stay strict wherever both raters rated
    await submitPhase2(r1, abCases[0]!, "r1", ["m1", "m1", "m1"]);
    await submitPhase2(r2, abCases[0]!, "r2", ["m1", "m1", "m1"]);
    await submitPhase2(r1, abCases[1]!, "r1", ["m1", "m1", "m1"]);
    await submitPhase2(r2, abCases[1]!, "r2", ["tie", "m1", "m1"]);
    await submitPhase2(r1, abCases[2]!, "r1", ["m1", "m1", "m1"]);
    await submitPhase2(r1, abCases[3]!, "r1", ["m1", "m1", "m1"]);
    await submitPhase2(r2, abCases[3]!, "r2", ["m2", "m1", "m1"]);

    const rows = await r1.exportRows("exp-rt");
    const abRows = rows.filter((r) => r.submission_type === "ab_clinical_reasoning");
    expect(abRows).toHaveLength(7);

    const exportPath = join(dataDir, "export.jsonl");
    writeFileSync(exportPath, rows.map((r) => JSON.stringify(r)).join("\n"));
    const outJson = join(dataDir, "analysis.json");
    const outMd = join(dataDir, "analysis.md");
    const stats = spawnSync(
      "python3",
      ["-m", "wardbench.cli", "stats", "--export", exportPath,
       "--out-json", outJson, "--out-markdown", outMd, "--resamples", "50"],
      { encoding: "utf-8" },
    );
    expect(stats.status).toBe(0);

    const artifact = JSON.parse(readFileSync(outJson, "utf-8"));
    const gpt5 = artifact.phase2.pooled.ab_all_decisive["gpt5 vs ours"] ??
      artifact.phase2.pooled.ab_all_decisive["ours vs gpt5"];
    expect(gpt5.bucket_counts).toEqual({ strict: 1, semi: 1, single: 1, non_consensus: 1 });
    const huatuo = artifact.phase2.pooled.ab_all_decisive["ours vs huatuo"];
    expect(huatuo.bucket_counts).toEqual({ strict: 3, semi: 0, single: 1, non_consensus: 0 });
    // every decisive verdict across the study chose the first-listed model
    expect(huatuo.wins_m1).toBe(7);
    expect(huatuo.wins_m2).toBe(0);
  }, 60_000);

  it("phase 1 finalize guard holds over HTTP and drafts survive reload", async () => {
    const api = new ApiClient(BASE, "tok-r1");
    const caseData = await api.getCase("rubric-case-0");

    const machine = new Phase1Machine(caseData, "r1");
    for (const c of machine.criteria) machine.toggleSuitable(c.criterion_id, true);
    machine.advanceToStep2();
    machine.setVerdict("c1", true);
    machine.setVerdict("c2", true); // c3..c5 left unverdicted
    await saveDraft(api, machine);

    await expect(api.finalize(machine.submissionKey)).rejects.toMatchObject({ status: 409 });

    // reload: the draft comes back from the server with state intact
    const restored = await restorePhase1(api, caseData, "r1");
    expect(restored.criteria.find((c) => c.criterion_id === "c1")!.verdict).toBe(true);
    expect(restored.step1Missing()).toEqual([]);

    restored.advanceToStep2();
    for (const c of restored.retained()) {
      if (c.verdict === null) restored.setVerdict(c.criterion_id, c.criterion_id !== "c4");
    }
    restored.setRationale("c4", "red flags not cited");
    await finalize(api, restored);

    const rows = await api.exportRows("exp-rt");
    const rubricRow = rows.find((r) => r.sample_id === "rubric-case-0");
    expect(rubricRow).toBeDefined();
    expect((rubricRow as { is_draft: boolean }).is_draft).toBe(false);
  }, 30_000);

  it("phase 2 draft restore rehydrates choices from the server", async () => {
    const api = new ApiClient(BASE, "tok-r2");
    const caseData = await api.getCase("ab-case-2");
    const machine = new Phase2Machine(caseData, "r2");
    machine.choose("m1");
    machine.showPair(1);
    machine.chooseTie();
    await saveDraft(api, machine);

    const restored = await restorePhase2(api, caseData, "r2");
    expect(restored.pairs[0]!.choice).toBe("m1");
    expect(restored.pairs[1]!.choice).toBe("tie");
    expect(restored.pairs[2]!.choice).toBeNull();
    expect(restored.missingPairs()).toEqual(["pair3"]);
  }, 30_000);
});
