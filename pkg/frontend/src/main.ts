/** Browser bootstrap: wires the machines, renderer, and service client.
 *
 * Served as a static module; configuration arrives via query parameters
 * (?service=...&token=...&rater=...&mode=phase1|phase2&cohort=...).
 */

import { ApiClient } from "./api.js";
import { finalize, restorePhase1, restorePhase2, saveDraft } from "./controller.js";
import { GuardError as P1Guard, Phase1Machine } from "./phase1.js";
import { GuardError as P2Guard, Phase2Machine } from "./phase2.js";
import { renderInvalidModal, renderPhase1, renderPhase2 } from "./render.js";
import type { Axis } from "./types.js";

type Machine = Phase1Machine | Phase2Machine;

function params(): URLSearchParams {
  return new URLSearchParams(window.location.search);
}

async function boot(): Promise<void> {
  const q = params();
  const api = new ApiClient(q.get("service") ?? "http://127.0.0.1:8771", q.get("token") ?? "");
  const rater = q.get("rater") ?? "rater";
  const mode = q.get("mode") === "phase2" ? "phase2" : "phase1";
  const cases = await api.getCases({
    cohort: q.get("cohort") ?? undefined,
    keyword: q.get("keyword") ?? undefined,
  });
  if (!cases.length) {
    document.body.textContent = "No cases available for this cohort/keyword.";
    return;
  }

  let index = 0;
  let machine: Machine =
    mode === "phase1"
      ? await restorePhase1(api, cases[0]!, rater)
      : await restorePhase2(api, cases[0]!, rater);
  let modalOpen = false;
  let modalReason = "";

  const root = document.getElementById("app")!;

  function draw(): void {
    const page = machine instanceof Phase1Machine ? renderPhase1(machine) : renderPhase2(machine);
    root.innerHTML = modalOpen ? page + renderInvalidModal(modalReason) : page;
  }

  async function advanceCase(): Promise<void> {
    index += 1;
    if (index >= cases.length) {
      root.innerHTML = "<p>All cases complete. Thank you.</p>";
      return;
    }
    machine =
      mode === "phase1"
        ? await restorePhase1(api, cases[index]!, rater)
        : await restorePhase2(api, cases[index]!, rater);
    draw();
  }

  root.addEventListener("click", (event) => {
    const el = (event.target as HTMLElement).closest("[data-action]") as HTMLElement | null;
    if (!el) return;
    void handleAction(el.dataset.action!, el.dataset.id, el.dataset.value);
  });

  root.addEventListener("change", (event) => {
    const el = event.target as HTMLElement;
    if (el.dataset.action === "verdict" && machine instanceof Phase1Machine) {
      machine.setVerdict(el.dataset.id!, el.dataset.value === "true");
      void saveDraft(api, machine).then(draw);
    }
  });

  root.addEventListener("input", (event) => {
    const el = event.target as HTMLTextAreaElement;
    if (el.dataset.action === "rationale" && machine instanceof Phase1Machine) {
      machine.setRationale(el.dataset.id!, el.value);
    } else if (el.dataset.action === "invalid-reason") {
      modalReason = el.value;
      const confirm = root.querySelector("[data-action=confirm-invalid]") as HTMLButtonElement;
      if (confirm) confirm.disabled = !modalReason.trim();
    }
  });

  document.addEventListener("keydown", (event) => {
    if (modalOpen || machine instanceof Phase1Machine) return;
    if ((machine as Phase2Machine).handleKey(event.key)) {
      void saveDraft(api, machine).then(draw);
    }
  });

  async function handleAction(action: string, id?: string, value?: string): Promise<void> {
    try {
      if (machine instanceof Phase1Machine) {
        switch (action) {
          case "suitable":
            machine.toggleSuitable(id!, value === "true");
            break;
          case "edit": {
            const text = window.prompt("Edit criterion", "");
            if (text) machine.editDescription(id!, text);
            break;
          }
          case "move":
            machine.move(id!, Number(value) as -1 | 1);
            break;
          case "delete":
            machine.remove(id!);
            break;
          case "reset":
            machine.resetToOracle(id!);
            break;
          case "add-criterion": {
            const text = window.prompt("New criterion description", "");
            const axis = window.prompt("Axis", "Accuracy");
            if (text && axis) machine.addCriterion(axis as Axis, text);
            break;
          }
          case "advance":
            machine.advanceToStep2();
            break;
          case "back":
            machine.backToStep1();
            break;
          case "finalize":
            await finalize(api, machine);
            await advanceCase();
            return;
        }
      } else {
        switch (action) {
          case "show-pair":
            machine.showPair(Number(value));
            break;
          case "choose-a":
            machine.handleKey("1");
            break;
          case "choose-b":
            machine.handleKey("2");
            break;
          case "choose-tie":
            machine.chooseTie();
            break;
          case "finalize":
            await finalize(api, machine);
            await advanceCase();
            return;
        }
      }
      switch (action) {
        case "mark-invalid":
          modalOpen = true;
          modalReason = "";
          break;
        case "confirm-invalid":
          machine.markInvalid(modalReason);
          modalOpen = false;
          break;
        case "cancel-invalid":
          modalOpen = false;
          break;
      }
      await saveDraft(api, machine);
      draw();
    } catch (err) {
      if (err instanceof P1Guard || err instanceof P2Guard) {
        window.alert(`Incomplete: ${err.missing.join(", ")}`);
      } else {
        window.alert(String(err)); // API failures keep the local draft intact
      }
      draw();
    }
  }

  draw();
}

void boot();
