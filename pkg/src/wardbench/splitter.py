"""Past/future splits of admission timelines with exclusion constraints.

The split index k is drawn from Normal(n/2, n/6), rounded half-up, clamped to
[1, n-1].  Coded-diagnosis (ICD-source) events are stripped from the past
only; the future stays untouched as the verification trajectory.  Admissions
whose patient dies or is re-admitted within 730 days of discharge are
excluded entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Any

import numpy as np

from .actionspaces import ALL_ACTION_SPACES, ActionSpace
from .timeline import AdmissionTimeline, ClinicalEvent, has_icd_source, retained_misc

OUTCOME_WINDOW_DAYS = 730
STRIP_RETRY_ATTEMPTS = 3


class TooFewEvents(ValueError):
    """Splitting needs at least two events."""


class MissingDischargeTime(ValueError):
    """Admission has no events to anchor a discharge time."""


class EmptyPastAfterStrip(ValueError):
    """Every past event was ICD-source; nothing is policy-visible."""


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SplitSpec:
    n: int
    k: int
    split_time: str
    seed: int

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n - 1:
            raise ValueError(f"k={self.k} outside [1, {self.n - 1}]")


@dataclass
class SplitItem:
    subject_id: int
    hadm_id: int
    past: list[ClinicalEvent]
    future: list[ClinicalEvent]
    misc_retained: dict[str, Any]
    demographics: dict[str, Any]
    spec: SplitSpec
    categories: tuple[ActionSpace, ...] = ALL_ACTION_SPACES
    truncated: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return (self.subject_id, self.hadm_id)


def sample_split(t: AdmissionTimeline, seed: int) -> SplitSpec:
    """Draw the split index from Normal(n/2, n/6); deterministic under seed."""
    n = len(t.timeline)
    if n < 2:
        raise TooFewEvents(f"need >= 2 events, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    k = round_half_up(float(rng.normal(n / 2.0, n / 6.0)))
    k = max(1, min(n - 1, k))
    return SplitSpec(n=n, k=k, split_time=t.timeline[k].time, seed=seed)


@dataclass
class CorpusRegistry:
    """subject_id -> admission intervals and date of death, built once."""

    intervals: dict[int, list[tuple[int, datetime, datetime]]] = field(default_factory=dict)
    dod: dict[int, datetime | None] = field(default_factory=dict)

    @classmethod
    def from_corpus(cls, corpus: list[AdmissionTimeline]) -> "CorpusRegistry":
        reg = cls()
        from .timeline import parse_time

        for t in corpus:
            if not t.timeline:
                continue
            start = t.timeline[0].instant
            end = t.timeline[-1].instant
            reg.intervals.setdefault(t.subject_id, []).append((t.hadm_id, start, end))
            patient = (t.misc or {}).get("Patient") or {}
            dod = parse_time(patient.get("dod")) if isinstance(patient, dict) else None
            if dod is not None or t.subject_id not in reg.dod:
                reg.dod[t.subject_id] = dod or reg.dod.get(t.subject_id)
        for subject in reg.intervals:
            reg.intervals[subject].sort(key=lambda iv: iv[1])
        return reg


def check_outcome_constraints(
    t: AdmissionTimeline, registry: CorpusRegistry
) -> tuple[bool, str]:
    """Pass only when no death and no re-admission within 730 days of discharge."""
    if not t.timeline:
        raise MissingDischargeTime(f"admission {t.key} has no events")
    discharge = t.timeline[-1].instant
    window = timedelta(days=OUTCOME_WINDOW_DAYS)

    dod = registry.dod.get(t.subject_id)
    if dod is not None and dod - discharge <= window:
        return False, "death-within-2y"

    for hadm_id, start, _end in registry.intervals.get(t.subject_id, []):
        if hadm_id == t.hadm_id:
            continue
        if discharge < start <= discharge + window:
            return False, "readmission-within-2y"
    return True, "ok"


def build_split_item(t: AdmissionTimeline, spec: SplitSpec) -> SplitItem:
    """past = events[1..k] minus ICD-source events; future = events[k+1..n] intact."""
    if spec.n != len(t.timeline):
        raise ValueError("spec does not match this timeline")
    past = [e for e in t.timeline[: spec.k] if not has_icd_source(e)]
    if not past:
        raise EmptyPastAfterStrip(f"admission {t.key} split at k={spec.k}")
    return SplitItem(
        subject_id=t.subject_id,
        hadm_id=t.hadm_id,
        past=past,
        future=list(t.timeline[spec.k :]),
        misc_retained=retained_misc(t.misc),
        demographics=t.demographics,
        spec=spec,
    )


def generate_split_item(t: AdmissionTimeline, seed: int) -> SplitItem | None:
    """Sample-and-build with the 3-attempt resample discipline for stripped pasts."""
    for attempt in range(STRIP_RETRY_ATTEMPTS):
        spec = sample_split(t, seed + attempt * 1_000_003)
        try:
            return build_split_item(t, spec)
        except EmptyPastAfterStrip:
            continue
    return None


def split_item_to_json(item: SplitItem) -> dict[str, Any]:
    return {
        "subject_id": item.subject_id,
        "hadm_id": item.hadm_id,
        "past": [e.to_json() for e in item.past],
        "future": [e.to_json() for e in item.future],
        "misc_retained": item.misc_retained,
        "demographics": item.demographics,
        "spec": {
            "n": item.spec.n,
            "k": item.spec.k,
            "split_time": item.spec.split_time,
            "seed": item.spec.seed,
        },
        "categories": [a.category.value for a in item.categories],
        "truncated": item.truncated,
    }


def split_item_from_json(doc: dict[str, Any]) -> SplitItem:
    from .actionspaces import Category

    return SplitItem(
        subject_id=int(doc["subject_id"]),
        hadm_id=int(doc["hadm_id"]),
        past=[ClinicalEvent(**e) for e in doc["past"]],
        future=[ClinicalEvent(**e) for e in doc["future"]],
        misc_retained=doc.get("misc_retained", {}),
        demographics=doc.get("demographics", {}),
        spec=SplitSpec(**doc["spec"]),
        categories=tuple(ActionSpace(Category(c)) for c in doc.get("categories", [])) or ALL_ACTION_SPACES,
        truncated=bool(doc.get("truncated", False)),
    )
