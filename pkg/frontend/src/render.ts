/** HTML rendering for both phases.
 *
 * Pure string templates over machine state: the browser bootstrap injects the
 * result and binds events by data attributes. Keeping this layer pure lets
 * tests assert the blinding invariant (true model identities never reach the
 * DOM) without a browser.
 */

import type { Phase1Machine } from "./phase1.js";
import type { Phase2Machine } from "./phase2.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function timelinePanel(events: unknown[]): string {
  const cards = events
    .map((e) => `<div class="event-card"><pre>${escapeHtml(JSON.stringify(e))}</pre></div>`)
    .join("");
  return `<section class="timeline" aria-label="patient past timeline">${cards}</section>`;
}

function referencePanel(answer: string, reasoning: string): string {
  return `
  <section class="reference">
    <p class="disclaimer">AI-generated oracle output with full trajectory access.
    Reference only, not a candidate to grade.</p>
    <details><summary>Reference reasoning</summary><p>${escapeHtml(reasoning)}</p></details>
    <p>${escapeHtml(answer)}</p>
  </section>`;
}

export function renderPhase1(machine: Phase1Machine): string {
  const caseData = machine.caseData;
  const cards = machine.criteria
    .map((c) => {
      const step1Controls = `
        <button data-action="suitable" data-id="${c.criterion_id}" data-value="true"
          class="${c.suitable === true ? "on" : ""}">Suitable</button>
        <button data-action="suitable" data-id="${c.criterion_id}" data-value="false"
          class="${c.suitable === false ? "on" : ""}">Not Suitable</button>
        <button data-action="edit" data-id="${c.criterion_id}">Edit</button>
        <button data-action="move" data-id="${c.criterion_id}" data-value="-1">Move up</button>
        <button data-action="move" data-id="${c.criterion_id}" data-value="1">Move down</button>
        ${machine.canDelete(c.criterion_id) ? `<button data-action="delete" data-id="${c.criterion_id}">Delete</button>` : ""}
        ${machine.canReset(c.criterion_id) ? `<button data-action="reset" data-id="${c.criterion_id}">Reset to original</button>` : ""}`;
      const help = machine.negativeCriterionHelp(c.criterion_id);
      const step2Controls = `
        <label><input type="radio" name="verdict-${c.criterion_id}" data-action="verdict"
          data-id="${c.criterion_id}" data-value="true" ${c.verdict === true ? "checked" : ""}>Accurate</label>
        <label><input type="radio" name="verdict-${c.criterion_id}" data-action="verdict"
          data-id="${c.criterion_id}" data-value="false" ${c.verdict === false ? "checked" : ""}>Not Accurate</label>
        ${help ? `<p class="negative-help">${escapeHtml(help)}</p>` : ""}
        <textarea data-action="rationale" data-id="${c.criterion_id}"
          placeholder="Why did the model pass or fail this?">${escapeHtml(c.rationale)}</textarea>`;
      const retained = c.suitable === true;
      return `
      <div class="criterion-card ${c.isNew ? "added" : ""}" data-criterion="${c.criterion_id}">
        <span class="axis">${c.axis}</span>
        <p class="description">${escapeHtml(c.description)}</p>
        ${machine.step === "step1" ? step1Controls : retained ? step2Controls : "<p class=\"dropped\">Not suitable</p>"}
      </div>`;
    })
    .join("");

  const candidate = machine.candidateVisible
    ? `<section class="candidate"><h3>Model response</h3><p>${escapeHtml(caseData.candidate_response)}</p></section>`
    : `<section class="candidate hidden"><p>The model response is revealed in Step 2.</p></section>`;

  const footer =
    machine.step === "step1"
      ? `<button data-action="advance" ${machine.step1Missing().length ? "disabled" : ""}>Continue to grading</button>
         <button data-action="add-criterion">Add criterion</button>`
      : `<button data-action="back">Back to rubric</button>
         <button data-action="finalize" ${machine.step2Missing().length ? "disabled" : ""}>Submit case</button>`;

  return `
  <main class="phase1" data-step="${machine.step}">
    ${timelinePanel(caseData.past_timeline)}
    <section class="question"><h3>Clinical question</h3><p>${escapeHtml(caseData.question)}</p></section>
    ${referencePanel(caseData.reference_answer, caseData.reference_reasoning)}
    ${candidate}
    <section class="rubric-console">${cards}</section>
    <footer>
      ${footer}
      <button data-action="mark-invalid">Mark case invalid</button>
    </footer>
  </main>`;
}

export function renderPhase2(machine: Phase2Machine): string {
  const caseData = machine.caseData;
  const pills = machine.pairs
    .map(
      (p, i) => `
      <button class="pill ${i === machine.activePair ? "active" : ""} ${p.choice ? "done" : ""}"
        data-action="show-pair" data-value="${i}">Comparison ${i + 1}</button>`,
    )
    .join("");
  const active = machine.pairs[machine.activePair]!;
  return `
  <main class="phase2">
    ${timelinePanel(caseData.past_timeline)}
    <section class="question"><h3>Clinical question</h3><p>${escapeHtml(caseData.question)}</p></section>
    ${referencePanel(caseData.reference_answer, caseData.reference_reasoning)}
    <nav class="pair-pills">${pills}</nav>
    <section class="responses">
      <article class="pane" data-pane="A">
        <h3>${escapeHtml(active.display.displayedAsA)}</h3>
        <p>${escapeHtml(machine.paneResponse("A"))}</p>
      </article>
      <article class="pane" data-pane="B">
        <h3>${escapeHtml(active.display.displayedAsB)}</h3>
        <p>${escapeHtml(machine.paneResponse("B"))}</p>
      </article>
    </section>
    <footer class="decision-bar sticky">
      <button data-action="choose-a" title="shortcut: 1">A is Better</button>
      <button data-action="choose-tie">It's a Tie</button>
      <button data-action="choose-b" title="shortcut: 2">B is Better</button>
      <button data-action="finalize" ${machine.canAdvance ? "" : "disabled"}>Next case</button>
      <button data-action="mark-invalid">Mark invalid</button>
    </footer>
  </main>`;
}

export function renderInvalidModal(reason: string): string {
  return `
  <div class="modal" role="dialog" aria-label="mark case invalid">
    <p>Explain why this case is invalid; a reason is required.</p>
    <textarea data-action="invalid-reason">${escapeHtml(reason)}</textarea>
    <button data-action="confirm-invalid" ${reason.trim() ? "" : "disabled"}>Mark invalid</button>
    <button data-action="cancel-invalid">Cancel</button>
  </div>`;
}
