"""Prompt templates for the oracle judge.

These strings are wire payload, not documentation: graders and generators are
prompted with them byte-for-byte, so treat any edit as a protocol change.
"""

from __future__ import annotations

from ..actionspaces import ActionSpace
from ..splitter import SplitItem
from ..timeline import canonical_json
from .types import Axis, ClinicalQAPair, Criterion, Provenance, Rubric

QA_GENERATION_TEMPLATE = """You are a clinical reasoning simulator LLM. Your goal is to generate a
question-answer pair for training a smaller LLM in the context of
reasoning about clinical decision support.
The clinical encounter has been split into two parts: past and future.
The past data includes the patient's history up to a certain point,
and the future data includes the patient's clinical outcomes and
events after that point.
--------------------
PAST DATA:
{past_data_json}
{misc_data_json}

Action Space Category: {action_space_category}
Action Space Description: {action_space_description}

Generate a clinical question that is answerable from the past data
only. The clinician-style answer and answer_reasoning must be written
as if the model had access only to the past, even though you (the
simulator) can see the future. Avoid information-extraction style
questions ("What was the last lactate?"); prefer synthesis questions
that require reasoning over multiple signals (labs, vitals, notes).

Use the FUTURE DATA below only to (a) pick clinically meaningful
questions whose gold answer actually occurs downstream, and (b)
populate the "source" field with the specific future events that
verify the answer. Do NOT mention the future in the question,
final_answer, or answer_reasoning text.

FUTURE DATA:
{future_data_json}

Return a single JSON object with fields
{{question, final_answer, answer_reasoning, action_space_category,
 action_space_subcategory, source}}.
"""

RUBRIC_TASK = "Clinical Reasoning"

RUBRIC_INPUT_DATA_DESCRIPTION = """The input data to judge will contain a timeline of a patient record, which is split into the past and future. The user query will ask a question about the patient based on the past timeline which can be answered by some information in the future timeline of the patient.

The ideal answer contains both a reasoning and a final answer. The reasoning should explain the final answer and the reasoning should be based on the past timeline. Your generated rubrics should contain criteria which judge the quality of both the reasoning and the final answer.

For instruction following the LLM will only have the past timeline to answer from, so ensure that you don't put an instruction-following reward requiring access to the future timeline.

Having a reasoning and final answer are enforced on the model. It is not necessary to have a separate instruction following reward for this aspect of the output in the rubrics. If no instruction following reward is required, you may skip it; it is more for rewarding user requests such as formatting, information retrieval, etc."""

RUBRIC_SYSTEM_TEMPLATE = """You are an expert clinician who is tasked with generating a rubric for evaluating the quality of health-related responses.

This rubric will judge the quality of responses generated by a large language model (LLM) in the context of health-related tasks, specifically for {task}.

{input_data_description}.

The target audience for reading the answers will always be healthcare professionals such as clinicians, physicians and nurses.

Your generated rubric must ALWAYS contain at least one criterion from each of the five axes: Accuracy, Completeness, CommunicationQuality, ContextAwareness, InstructionFollowing.

You must generate only a single rubric with multiple criteria. Do not generate more than one rubric or any other text!

NEVER mention the future timeline in your rubric, it is imperative that the rubric is based on the past timeline only. Only use the future timeline as your own reference to build the rubric criteria, but never include a direct reference to it in your criteria or as a task/requirement for the model to follow.

### RUBRIC RULES
- Every criterion is self-contained and graded pass / fail.
- Give each criterion a non-zero integer score from -10 to +10 --- positive values reward helpful behaviour, negative values penalise unsafe or distracting behaviour.
  - For negative values, the description should still be something which can be checked off as present or not. If the description is present in the response, the negative score is added to the model's score (e.g., "Mentions wrong medication" -> -5).
  - For positive values, the description should likewise be binary-checkable (e.g., "Mentions precaution in clinical care" -> +7).
- Penalise negative behaviour and reward positive behaviour; negative behaviour is particularly important in clinical settings where errors can be critical.
- Final score = (sum of points for met items) / (sum of all positive point values), then clip to [0,1].
- Tag each criterion with exactly one axis: Accuracy, Completeness, CommunicationQuality, ContextAwareness, InstructionFollowing. The finished rubric must include at least one criterion per axis.
- Use any of the consensus criteria enumerated inline in the prompt whenever they apply, or write new criteria.
- Keep wording neutral; do not award partial credit; never mention model internals.

Return a single JSON object of the form
{{"meta": {{"theme": "string"}}, "criteria": [{{"axis": "...", "description": "...", "points": 5}}]}}
with one or more entries where every axis appears >= 1x.

{theme_exemplars}"""

GRADER_SYSTEM_PROMPT = """You are a medical-AI evaluator.

Given patient context, the full conversation, the assistant's answer, and a rubric with numbered criteria, decide independently for each criterion whether the answer MEETS it.
- Return true if the answer satisfies the criterion, false otherwise.
- Output JSON only, whose keys are the criterion IDs shown in the rubric.
- If you find that the answer has repeating text or is nonsensical, you must mark all criteria as false. This is a sign of degenerate outputs which are not acceptable under any circumstance, regardless of if certain parts of the answer may seem to meet some criteria.
- If both the reasoning and answer to be judged are empty, mark all criteria as false.
- Accept multilingual responses; do not judge against the language used as long as the output makes sense.

Example format. If the rubric lists

c1: "Provides clear emergency advice"
c2: "Uses correct drug dose"

then your reply must be exactly

{ "c1": true, "c2": false }

No other keys, comments, or text."""

GRADER_USER_TEMPLATE = """PATIENT CONTEXT
{context_str}

CONVERSATION
{conversation_history}

LAST USER MESSAGE
{user_query}

ASSISTANT RESPONSE TO BE JUDGED
{model_response}

RUBRIC  (each criterion has an ID)
{rubric_lines}

INSTRUCTIONS
Return one JSON object. Every key must be exactly the criterion ID
(e.g. "c1") and the value must be `true` or `false`."""


def past_data_json(item: SplitItem) -> str:
    return canonical_json([e.to_json() for e in item.past])


def misc_data_json(item: SplitItem) -> str:
    return canonical_json(
        {"demographics": item.demographics, "misc": item.misc_retained}
    )


def future_data_json(item: SplitItem) -> str:
    return canonical_json([e.to_json() for e in item.future])


def build_qa_prompt(item: SplitItem, cat: ActionSpace) -> str:
    return QA_GENERATION_TEMPLATE.format(
        past_data_json=past_data_json(item),
        misc_data_json=misc_data_json(item),
        action_space_category=cat.display_name,
        action_space_description=cat.description,
        future_data_json=future_data_json(item),
    )


def build_rubric_prompt(item: SplitItem, qa: ClinicalQAPair, theme_exemplars: str = "") -> str:
    system = RUBRIC_SYSTEM_TEMPLATE.format(
        task=RUBRIC_TASK,
        input_data_description=RUBRIC_INPUT_DATA_DESCRIPTION,
        theme_exemplars=theme_exemplars,
    )
    payload = canonical_json(
        {
            "past": [e.to_json() for e in item.past],
            "future": [e.to_json() for e in item.future],
            "question": qa.question,
            "reference_answer": qa.final_answer,
            "reference_reasoning": qa.answer_reasoning,
        }
    )
    return system + "\n\nINPUT DATA\n" + payload


def grader_context(item: SplitItem, qa: ClinicalQAPair) -> str:
    blocks = [
        "PATIENT PAST TIMELINE\n" + past_data_json(item),
        "PATIENT MISC INFO\n" + misc_data_json(item),
        "REFERENCE ANSWER\n" + qa.final_answer,
        "REFERENCE ANSWER REASONING\n" + qa.answer_reasoning,
        "SOURCE FOR REFERENCE ANSWER\n"
        + canonical_json([{"event": s.event, "time": s.time, "source": s.source} for s in qa.source]),
    ]
    return "\n\n".join(blocks)


def rubric_lines(rubric: Rubric) -> str:
    return "\n".join(f"{c.id}: {c.description}" for c in rubric.criteria)


def build_grader_prompt(item: SplitItem, qa: ClinicalQAPair, rubric: Rubric, candidate: str) -> str:
    return GRADER_USER_TEMPLATE.format(
        context_str=grader_context(item, qa),
        conversation_history="(single turn)",
        user_query=qa.question,
        model_response=candidate,
        rubric_lines=rubric_lines(rubric),
    )


FALLBACK_THEME = "Health Data Tasks"

_FALLBACK_ROWS = (
    (Axis.ACCURACY, 10, "Correctly identifies the answer with clinical accuracy."),
    (Axis.COMPLETENESS, 8, "Mentions supporting evidence for the identified answer from the patient timeline."),
    (Axis.COMMUNICATION_QUALITY, 7, "Uses clear and concise language appropriate for healthcare professionals."),
    (Axis.CONTEXT_AWARENESS, 9, "References relevant clinical context such as the identified source from the EHR document."),
    (Axis.COMPLETENESS, -6, "References unnecessary or imprecise information in its reasoning or answer."),
    (Axis.INSTRUCTION_FOLLOWING, 5, "Provides a reasoning section and final answer as requested."),
)


def fallback_rubric() -> Rubric:
    """The constant six-criterion rubric used when rubric parsing fails."""
    return Rubric(
        theme=FALLBACK_THEME,
        criteria=[
            Criterion(axis=a, points=p, description=d, id=f"c{i + 1}", provenance=Provenance.ORACLE)
            for i, (a, p, d) in enumerate(_FALLBACK_ROWS)
        ],
    )
