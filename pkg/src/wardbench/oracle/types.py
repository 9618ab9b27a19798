"""Domain types for oracle-judge traffic: QA pairs, rubrics, verdicts, config."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping


class SchemaViolation(ValueError):
    """Oracle response failed schema or invariant validation."""


class SourceNotInFuture(SchemaViolation):
    """A source citation falls outside the item's future window."""


class AxisCoverageMissing(SchemaViolation):
    """Rubric lacks at least one criterion on some axis."""


class FutureLeakDetected(SchemaViolation):
    """Rubric text references the withheld future timeline."""


class EndpointUnavailable(RuntimeError):
    """Endpoint kept failing after the retry budget was spent."""


class NoPositiveCriteria(ValueError):
    """Rubric has no positive-point criteria, so the score denominator is zero."""


class Axis(str, Enum):
    ACCURACY = "Accuracy"
    COMPLETENESS = "Completeness"
    COMMUNICATION_QUALITY = "CommunicationQuality"
    CONTEXT_AWARENESS = "ContextAwareness"
    INSTRUCTION_FOLLOWING = "InstructionFollowing"


ALL_AXES = tuple(Axis)

THEMES = (
    "Emergency Referrals",
    "Responding under Uncertainty",
    "Health Data Tasks",
    "Global Health",
    "Expertise-Specific Communication",
    "Context Seeking",
    "Response Depth",
)

MIN_POINTS, MAX_POINTS = -10, 10


class Provenance(str, Enum):
    ORACLE = "oracle"
    CLINICIAN_ADDED = "clinician-added"
    CLINICIAN_MODIFIED = "clinician-modified"


@dataclass(frozen=True)
class SourceDetail:
    event: str
    time: str
    source: str

    def __post_init__(self) -> None:
        if not (self.event and self.time and self.source):
            raise SchemaViolation("source detail fields must be non-empty")


@dataclass
class ClinicalQAPair:
    question: str
    final_answer: str
    answer_reasoning: str
    action_space_category: str
    action_space_subcategory: str | None = None
    source: list[SourceDetail] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.source:
            raise SchemaViolation("QA pair must cite at least one source")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ClinicalQAPair":
        try:
            sources = [
                SourceDetail(event=str(s["event"]), time=str(s["time"]), source=str(s["source"]))
                for s in doc.get("source", [])
            ]
            return cls(
                question=str(doc["question"]),
                final_answer=str(doc["final_answer"]),
                answer_reasoning=str(doc["answer_reasoning"]),
                action_space_category=str(doc["action_space_category"]),
                action_space_subcategory=doc.get("action_space_subcategory"),
                source=sources,
            )
        except (KeyError, TypeError) as exc:
            raise SchemaViolation(f"QA pair missing field: {exc}") from exc

    def to_json(self) -> dict[str, Any]:
        return {
            "question": self.question,
            "final_answer": self.final_answer,
            "answer_reasoning": self.answer_reasoning,
            "action_space_category": self.action_space_category,
            "action_space_subcategory": self.action_space_subcategory,
            "source": [
                {"event": s.event, "time": s.time, "source": s.source} for s in self.source
            ],
        }


@dataclass
class Criterion:
    axis: Axis
    description: str
    points: int
    id: str = ""
    provenance: Provenance = Provenance.ORACLE

    def __post_init__(self) -> None:
        if not self.description:
            raise SchemaViolation("criterion description must be non-empty")
        if not isinstance(self.points, int) or self.points == 0:
            raise SchemaViolation("criterion points must be a non-zero integer")
        if not MIN_POINTS <= self.points <= MAX_POINTS:
            raise SchemaViolation(f"criterion points {self.points} outside [{MIN_POINTS}, {MAX_POINTS}]")


@dataclass
class Rubric:
    theme: str
    criteria: list[Criterion]

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.theme not in THEMES:
            raise SchemaViolation(f"unknown rubric theme: {self.theme!r}")
        axes = {c.axis for c in self.criteria}
        missing = [a.value for a in ALL_AXES if a not in axes]
        if missing:
            raise AxisCoverageMissing(f"axes without criteria: {missing}")
        if sum(c.points for c in self.criteria if c.points > 0) <= 0:
            raise SchemaViolation("rubric must carry positive total weight")

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.criteria]

    def to_json(self) -> dict[str, Any]:
        return {
            "theme": self.theme,
            "criteria": [
                {
                    "id": c.id,
                    "axis": c.axis.value,
                    "description": c.description,
                    "points": c.points,
                    "provenance": c.provenance.value,
                }
                for c in self.criteria
            ],
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "Rubric":
        return cls(
            theme=doc["theme"],
            criteria=[
                Criterion(
                    axis=Axis(c["axis"]),
                    description=c["description"],
                    points=int(c["points"]),
                    id=c.get("id", f"c{i + 1}"),
                    provenance=Provenance(c.get("provenance", "oracle")),
                )
                for i, c in enumerate(doc["criteria"])
            ],
        )


@dataclass
class VerdictVector:
    verdicts: dict[str, bool]
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.degenerate and any(self.verdicts.values()):
            raise SchemaViolation("degenerate verdicts must be all false")

    def matches(self, rubric: Rubric) -> bool:
        return set(self.verdicts) == set(rubric.ids)

    @classmethod
    def all_false(cls, rubric: Rubric, degenerate: bool = False) -> "VerdictVector":
        return cls(verdicts={cid: False for cid in rubric.ids}, degenerate=degenerate)

    def to_json(self) -> dict[str, Any]:
        return {"verdicts": self.verdicts, "degenerate": self.degenerate}


@dataclass
class OracleConfig:
    endpoint: str = "mock://oracle"
    api_key: str = ""
    model: str = "oracle-judge"
    temperature: float = 1.0
    top_p: float = 0.95
    top_k: int = 64
    grading_temperature: float = 0.0
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_jitter: float = 0.2
    timeout: float = 60.0
    max_in_flight: int = 4
    transcript_path: str | None = None
    theme_exemplars: str = ""
