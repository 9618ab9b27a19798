"""Run a model over items, grade, and aggregate per-axis / per-action reports.

The headline aggregate is the unweighted mean of per-item clipped scores;
axis, action-space, and critical-accuracy breakdowns are micro-aggregated
over per-criterion points (earned points over positive points, pooled).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

from .actionspaces import Category
from .datum import PomdpDatum
from .oracle.gateway import OracleGateway
from .oracle.types import Axis, VerdictVector
from .reward import Family, compute_rubric_score, parse_completion
from .stats.tests import wilcoxon_signed_rank

log = logging.getLogger(__name__)

EVAL_TEMPERATURE = 0.2
EVAL_MAX_NEW_TOKENS = 4096
CRITICAL_WEIGHT = 8


@dataclass
class CriterionRow:
    criterion_id: str
    axis: Axis
    points: int
    met: bool


@dataclass
class EvalRecord:
    datum_id: str
    hadm_id: int
    split_seed: int
    category: Category
    candidate: str
    think: str | None
    answer: str | None
    verdicts: VerdictVector
    score: float
    rows: list[CriterionRow] = field(default_factory=list)
    error: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "datum_id": self.datum_id,
            "hadm_id": self.hadm_id,
            "split_seed": self.split_seed,
            "category": self.category.value,
            "candidate": self.candidate,
            "think": self.think,
            "answer": self.answer,
            "verdicts": self.verdicts.to_json(),
            "score": self.score,
            "rows": [
                {"criterion_id": r.criterion_id, "axis": r.axis.value, "points": r.points, "met": r.met}
                for r in self.rows
            ],
            "error": self.error,
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "EvalRecord":
        return cls(
            datum_id=doc["datum_id"],
            hadm_id=int(doc["hadm_id"]),
            split_seed=int(doc["split_seed"]),
            category=Category(doc["category"]),
            candidate=doc["candidate"],
            think=doc.get("think"),
            answer=doc.get("answer"),
            verdicts=VerdictVector(
                verdicts=doc["verdicts"]["verdicts"], degenerate=doc["verdicts"]["degenerate"]
            ),
            score=float(doc["score"]),
            rows=[
                CriterionRow(
                    criterion_id=r["criterion_id"],
                    axis=Axis(r["axis"]),
                    points=int(r["points"]),
                    met=bool(r["met"]),
                )
                for r in doc.get("rows", [])
            ],
            error=doc.get("error"),
        )


class EmptyRecordSet(ValueError):
    pass


class KeyMismatch(ValueError):
    pass


@dataclass
class AggregateReport:
    aggregate: float
    aggregate_micro: float
    per_axis: dict[str, float]
    per_action: dict[str, float]
    critical_accuracy: float | None
    negative_trigger_rate: float
    mean_length_chars: float
    n_records: int

    def to_json(self) -> dict[str, Any]:
        return {
            "aggregate": self.aggregate,
            "aggregate_micro": self.aggregate_micro,
            "per_axis": self.per_axis,
            "per_action": self.per_action,
            "critical_accuracy": self.critical_accuracy,
            "negative_trigger_rate": self.negative_trigger_rate,
            "mean_length_chars": self.mean_length_chars,
            "n_records": self.n_records,
        }


ModelFn = Callable[[dict[str, Any]], str]


def grade_datum(
    gateway: OracleGateway, datum: PomdpDatum, candidate: str, family: Family | str
) -> EvalRecord:
    parse = parse_completion(candidate, family)
    verdicts = gateway.grade(
        candidate, datum.item, datum.qa, datum.rubric, reasoning=parse.think, answer=parse.answer
    )
    score = 0.0 if verdicts.degenerate else compute_rubric_score(datum.rubric, verdicts)
    rows = [
        CriterionRow(criterion_id=c.id, axis=c.axis, points=c.points, met=verdicts.verdicts[c.id])
        for c in datum.rubric.criteria
    ]
    return EvalRecord(
        datum_id=datum.datum_id,
        hadm_id=datum.item.hadm_id,
        split_seed=datum.item.spec.seed,
        category=datum.category,
        candidate=candidate,
        think=parse.think,
        answer=parse.answer,
        verdicts=verdicts,
        score=score,
        rows=rows,
    )


def run_eval(
    items: list[PomdpDatum],
    model: ModelFn,
    gateway: OracleGateway,
    family: Family | str = Family.THINK_THEN_TEXT,
) -> list[EvalRecord]:
    """One generation per item at temperature 0.2, then grade; failures recorded."""
    records: list[EvalRecord] = []
    for datum in items:
        request = {
            "question": datum.qa.question,
            "past": [e.to_json() for e in datum.item.past],
            "demographics": datum.item.demographics,
            "misc": datum.item.misc_retained,
            "temperature": EVAL_TEMPERATURE,
            "max_new_tokens": EVAL_MAX_NEW_TOKENS,
        }
        try:
            candidate = model(request)
            records.append(grade_datum(gateway, datum, candidate, family))
        except Exception as exc:  # per-item failure, run continues
            log.warning("item %s failed: %s", datum.datum_id, exc)
            records.append(
                EvalRecord(
                    datum_id=datum.datum_id,
                    hadm_id=datum.item.hadm_id,
                    split_seed=datum.item.spec.seed,
                    category=datum.category,
                    candidate="",
                    think=None,
                    answer=None,
                    verdicts=VerdictVector.all_false(datum.rubric, degenerate=True),
                    score=0.0,
                    rows=[
                        CriterionRow(c.id, c.axis, c.points, False)
                        for c in datum.rubric.criteria
                    ],
                    error=str(exc),
                )
            )
    return records


def _micro(rows: list[CriterionRow]) -> float | None:
    positive = sum(r.points for r in rows if r.points > 0)
    if positive <= 0:
        return None
    earned = sum(r.points for r in rows if r.met)
    return min(1.0, max(0.0, earned / positive))


def aggregate(records: list[EvalRecord]) -> AggregateReport:
    if not records:
        raise EmptyRecordSet("no records to aggregate")
    all_rows = [r for rec in records for r in rec.rows]

    per_axis: dict[str, float] = {}
    for axis in Axis:
        value = _micro([r for r in all_rows if r.axis is axis])
        per_axis[axis.value] = value if value is not None else 0.0

    per_action: dict[str, float] = {}
    for cat in Category:
        rows = [r for rec in records if rec.category is cat for r in rec.rows]
        value = _micro(rows)
        if value is not None:
            per_action[cat.value] = value

    critical_rows = [
        r for r in all_rows if r.axis is Axis.ACCURACY and abs(r.points) >= CRITICAL_WEIGHT
    ]
    critical = _micro(critical_rows)

    negative_rows = [r for r in all_rows if r.points < 0]
    negative_trigger_rate = (
        sum(1 for r in negative_rows if r.met) / len(negative_rows) if negative_rows else 0.0
    )

    return AggregateReport(
        aggregate=sum(r.score for r in records) / len(records),
        aggregate_micro=_micro(all_rows) or 0.0,
        per_axis=per_axis,
        per_action=per_action,
        critical_accuracy=critical,
        negative_trigger_rate=negative_trigger_rate,
        mean_length_chars=sum(len(r.candidate) for r in records) / len(records),
        n_records=len(records),
    )


def head_to_head(records_a: list[EvalRecord], records_b: list[EvalRecord]) -> dict[str, Any]:
    """Per-item score comparison plus a two-sided Wilcoxon signed-rank test."""
    a_by_key = {r.datum_id: r for r in records_a}
    b_by_key = {r.datum_id: r for r in records_b}
    if set(a_by_key) != set(b_by_key):
        raise KeyMismatch("record sets cover different items")
    keys = sorted(a_by_key)
    scores_a = [a_by_key[k].score for k in keys]
    scores_b = [b_by_key[k].score for k in keys]
    wins = sum(1 for x, y in zip(scores_a, scores_b) if x > y)
    losses = sum(1 for x, y in zip(scores_a, scores_b) if x < y)
    ties = len(keys) - wins - losses
    result = wilcoxon_signed_rank(scores_a, scores_b)
    return {
        "wins": wins,
        "ties": ties,
        "losses": losses,
        "wilcoxon_p": result.p_value,
        "wilcoxon_degenerate": result.degenerate,
        "n": len(keys),
    }
