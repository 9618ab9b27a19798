"""Shared types for the annotation analysis engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..oracle.types import Axis


class EmptyInput(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class RaggedMatrix(ValueError):
    pass


class InsufficientPairs(ValueError):
    pass


class ConstantSeries(ValueError):
    pass


class NoDyads(ValueError):
    pass


class NoDecisive(ValueError):
    pass


class DisconnectedGraph(ValueError):
    pass


@dataclass
class StatResult:
    value: float
    ci_low: float | None = None
    ci_high: float | None = None
    p_value: float | None = None
    n: int = 0
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.ci_low is not None and self.ci_high is not None and not self.degenerate:
            if not (self.ci_low <= self.value <= self.ci_high):
                raise ValueError("point estimate must sit inside its interval")

    def to_json(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "p_value": self.p_value,
            "n": self.n,
            "degenerate": self.degenerate,
        }


@dataclass
class AnnotatedCriterion:
    """One rubric criterion as a rater left it after curation and grading."""

    criterion_id: str
    axis: Axis
    points: int
    order: int = 0
    is_new: bool = False
    is_modified: bool = False
    not_relevant: bool = False
    verdicts: dict[str, bool] = field(default_factory=dict)  # rater_id -> verdict
    oracle_verdict: bool | None = None
    rationales: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.is_new and self.oracle_verdict is not None:
            raise ValueError("clinician-added criteria carry no oracle verdict")
        if self.not_relevant and self.verdicts:
            raise ValueError("not-relevant criteria carry no verdicts")


@dataclass
class RubricAnnotation:
    """One case's curated rubric with per-rater and oracle verdicts."""

    case_id: str
    cohort: str
    criteria: list[AnnotatedCriterion]
    is_invalid: bool = False
    invalid_reason: str | None = None

    def retained(self) -> list[AnnotatedCriterion]:
        return [c for c in self.criteria if not c.not_relevant]

    def oracle_authored(self) -> list[AnnotatedCriterion]:
        return [c for c in self.criteria if not c.is_new]


@dataclass
class AbDyad:
    """One displayed (case, model pair) with per-rater choices and audit fields."""

    case_id: str
    pair: tuple[str, str]  # (model_1, model_2)
    choices: dict[str, str]  # rater_id -> "m1" | "m2" | "tie"
    display: dict[str, str] = field(default_factory=dict)
    lengths: tuple[int, int] = (0, 0)  # chars of (model_1, model_2) responses
    decision_time_seconds: dict[str, float] = field(default_factory=dict)
    is_invalid: bool = False
    invalid_reason: str | None = None
    is_redisplay: bool = False
    cohort: str = ""

    def __post_init__(self) -> None:
        if self.display:
            actual = {self.display.get("actualModelA"), self.display.get("actualModelB")}
            if actual != set(self.pair):
                raise ValueError("display mapping must be a bijection onto the pair")
        for choice in self.choices.values():
            if choice not in ("m1", "m2", "tie"):
                raise ValueError(f"bad choice {choice!r}")

    def chosen_model(self, rater: str) -> str | None:
        c = self.choices.get(rater)
        if c == "m1":
            return self.pair[0]
        if c == "m2":
            return self.pair[1]
        return None
