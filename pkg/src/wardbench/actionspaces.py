"""The four reasoning action spaces and their canonical prompt descriptions.

The description blocks are injected verbatim into query-generation prompts;
they are data, so edits here change the oracle contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Category(str, Enum):
    DIAGNOSIS = "Diagnosis"
    TREATMENT = "Treatment"
    PROCEDURAL = "Procedural"
    UNCERTAINTY = "Uncertainty"


DISPLAY_NAMES = {
    Category.DIAGNOSIS: "Diagnosis Assistance",
    Category.TREATMENT: "Treatment Recommendations",
    Category.PROCEDURAL: "Procedural Decision Making",
    Category.UNCERTAINTY: "Responding under Uncertainty",
}

DESCRIPTIONS = {
    Category.DIAGNOSIS: (
        "This category focuses on clinical reasoning to determine the correct diagnosis. "
        "It includes the following subcategories: (i) Differential Diagnosis Generation & "
        "Diagnostic Hypothesis Ranking: the model generates a ranked list of potential "
        "diagnoses --- covering common conditions as well as critical must-not-miss "
        "possibilities --- by analysing abnormal vitals, lab trends, and clinical notes; "
        "(ii) Diagnostic Test Suggestions: in cases of uncertainty, the model may recommend "
        "additional tests (e.g., ordering a troponin test for suspected myocardial "
        "infarction) to refine the diagnosis. Additional contextual information (e.g., "
        "family history, vaccination status, travel history) should be considered when "
        "available."
    ),
    Category.TREATMENT: (
        "This category is aimed at guiding therapeutic interventions and ensuring best "
        "practices in patient care. It is subdivided into: (i) Medication Management --- "
        "the model recommends appropriate medications, specifying drug name, dosage, and "
        "duration, while taking into account patient-specific factors (e.g., allergies or "
        "prior adverse reactions); (ii) Supportive Care & Monitoring --- the model suggests "
        "supportive measures such as IV fluids, oxygen therapy, or nursing care orders that "
        "complement primary treatments; (iii) Follow-up and Long-Term Planning --- the model "
        "outlines future monitoring steps, reassessment timings, or specialist "
        "consultations. The answer should propose a future treatment event rather than "
        "merely extracting past actions."
    ),
    Category.PROCEDURAL: (
        "This category addresses decisions related to both diagnostic and therapeutic "
        "procedures. It is organised into: (i) Diagnostic Procedures --- recommendations "
        "for tests such as imaging, biopsies, or endoscopies, determined from evolving "
        "clinical data; (ii) Therapeutic Procedures --- decisions about invasive "
        "interventions (e.g., surgery, catheterisation) when indicated; (iii) Timing, "
        "Approach, and Watchful Waiting --- the model assesses the optimal timing for "
        "procedures, chooses between alternative approaches (e.g., minimally invasive "
        "versus open surgery), or recommends non-intervention when appropriate."
    ),
    Category.UNCERTAINTY: (
        "This category focuses on how the model should handle situations where the "
        "clinical data is incomplete or ambiguous. The questions generated for this "
        "category should be intentionally ambiguous and must require the agent to reason "
        "about how to handle uncertainty. It includes: (1) Uncertainty Acknowledgment; "
        "(2) Risk-Benefit Analysis; (3) Alternative Recommendations; (4) Escalation "
        "Protocols; and (5) Context Seeking (asking for additional information that could "
        "help clarify the clinical picture)."
    ),
}


@dataclass(frozen=True)
class ActionSpace:
    category: Category

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self.category]

    @property
    def description(self) -> str:
        return DESCRIPTIONS[self.category]


ALL_ACTION_SPACES = tuple(ActionSpace(c) for c in Category)
