"""Canonical data model and ingestion for per-admission EHR event streams.

An admission arrives as one JSON object holding a patient key, an admission
key, demographics, a flat event timeline, and a ``misc`` block with triage,
patient, and coded-diagnosis sub-records.  Ingestion normalizes the timeline
to ascending chronological order (wire order is descending) and drops events
whose timestamp is missing or unparseable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Iterator

log = logging.getLogger(__name__)

DEFAULT_MAX_TOKENS = 65_536

# misc blocks that survive into any policy-visible serialization
RETAINED_MISC_KEYS = ("Patient", "ED_triage")


class MalformedJson(ValueError):
    """Input bytes are not a JSON object."""


class MissingRequiredField(ValueError):
    """Admission JSON lacks subject_id, hadm_id, or timeline."""


class EmptyPast(ValueError):
    """Requested a past slice of zero events."""


def parse_time(value: Any) -> datetime | None:
    """Parse an ISO-8601 instant; returns None when missing/unparseable.

    Naive timestamps are treated as UTC so mixed corpora stay comparable.
    """
    if not isinstance(value, str) or not value.strip():
        return None
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


@dataclass
class ClinicalEvent:
    time: str
    source: str
    table: str = ""
    data: dict[str, Any] = field(default_factory=dict)
    descriptions: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.source:
            raise ValueError("event source must be non-empty")
        if parse_time(self.time) is None:
            raise ValueError(f"event time is not a valid ISO-8601 instant: {self.time!r}")

    @property
    def instant(self) -> datetime:
        dt = parse_time(self.time)
        assert dt is not None  # guaranteed by __post_init__
        return dt

    def to_json(self) -> dict[str, Any]:
        return {
            "time": self.time,
            "source": self.source,
            "table": self.table,
            "data": self.data,
            "descriptions": self.descriptions,
        }


@dataclass
class TokenBudget:
    """Context ceiling for serialized pasts; ``truncated`` records overflow."""

    max_tokens: int = DEFAULT_MAX_TOKENS
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass
class AdmissionTimeline:
    subject_id: int
    hadm_id: int
    demographics: dict[str, Any] = field(default_factory=dict)
    timeline: list[ClinicalEvent] = field(default_factory=list)
    misc: dict[str, Any] = field(default_factory=dict)

    @property
    def key(self) -> tuple[int, int]:
        return (self.subject_id, self.hadm_id)

    def to_json(self) -> dict[str, Any]:
        return {
            "subject_id": self.subject_id,
            "hadm_id": self.hadm_id,
            "demographics": self.demographics,
            "timeline": [e.to_json() for e in self.timeline],
            "misc": self.misc,
        }


def _sorted_events(events: Iterable[ClinicalEvent]) -> list[ClinicalEvent]:
    # stable sort on (time, source); stability supplies the original-index tiebreak
    return sorted(events, key=lambda e: (e.instant, e.source))


def ingest_admission(raw: bytes | str) -> AdmissionTimeline:
    """Parse one admission JSON object into an ascending-time timeline.

    Events with missing or unparseable timestamps are dropped with a warning;
    structural failures (not an object, missing keys) reject the admission.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc
    if not isinstance(doc, dict):
        raise MalformedJson("admission must be a JSON object")
    return admission_from_dict(doc)


def admission_from_dict(doc: dict[str, Any]) -> AdmissionTimeline:
    for required in ("subject_id", "hadm_id", "timeline"):
        if required not in doc:
            raise MissingRequiredField(required)
    if not isinstance(doc["timeline"], list):
        raise MissingRequiredField("timeline")

    events: list[ClinicalEvent] = []
    for i, item in enumerate(doc["timeline"]):
        if not isinstance(item, dict):
            log.warning("dropping non-object timeline entry %d", i)
            continue
        if parse_time(item.get("time")) is None:
            log.warning("dropping event %d with missing/invalid timestamp", i)
            continue
        source = item.get("source") or ""
        if not source:
            log.warning("dropping event %d with empty source", i)
            continue
        events.append(
            ClinicalEvent(
                time=item["time"],
                source=source,
                table=item.get("table", ""),
                data=item.get("data", {}) or {},
                descriptions=item.get("descriptions", {}) or {},
            )
        )

    return AdmissionTimeline(
        subject_id=int(doc["subject_id"]),
        hadm_id=int(doc["hadm_id"]),
        demographics=doc.get("demographics", {}) or {},
        timeline=_sorted_events(events),
        misc=doc.get("misc", {}) or {},
    )


def iter_admissions(path: str) -> Iterator[AdmissionTimeline]:
    """Yield admissions from a .json file (one object) or .jsonl file (one per row)."""
    with open(path, "r", encoding="utf-8") as fh:
        head = fh.read(1)
        fh.seek(0)
        if path.endswith(".jsonl") or (head and head != "{"):
            for line in fh:
                line = line.strip()
                if line:
                    yield ingest_admission(line)
        else:
            text = fh.read()
            stripped = text.lstrip()
            # a .json file may still hold concatenated lines of objects
            if "\n" in text.strip() and stripped.startswith("{") and stripped.rstrip().endswith("}") and text.count("\n{") > 0:
                for line in text.splitlines():
                    line = line.strip()
                    if line:
                        yield ingest_admission(line)
            else:
                yield ingest_admission(text)


def canonical_json(obj: Any) -> str:
    """Deterministic JSON encoding used everywhere a byte-stable artifact is required."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def estimate_tokens(text: str) -> int:
    """Characters/4 heuristic; the budget applies to this estimate."""
    return len(text) // 4


def retained_misc(misc: dict[str, Any]) -> dict[str, Any]:
    """Only Patient and ED_triage entries survive into policy-visible views."""
    return {k: misc[k] for k in RETAINED_MISC_KEYS if k in misc}


def _past_payload(t: AdmissionTimeline, events: list[ClinicalEvent]) -> dict[str, Any]:
    return {
        "subject_id": t.subject_id,
        "hadm_id": t.hadm_id,
        "demographics": t.demographics,
        "misc": retained_misc(t.misc),
        "timeline": [e.to_json() for e in events],
    }


def serialize_past(t: AdmissionTimeline, upto: int, budget: TokenBudget | None = None) -> str:
    """Serialize events [1..upto] plus retained misc as deterministic JSON text.

    If the character/4 estimate exceeds the budget, the oldest events are
    dropped first (demographics and misc are always kept) and
    ``budget.truncated`` is set.
    """
    if upto == 0:
        raise EmptyPast("past slice must contain at least one event")
    if not 0 < upto <= len(t.timeline):
        raise ValueError(f"upto={upto} out of range 1..{len(t.timeline)}")
    if budget is None:
        budget = TokenBudget()

    events = t.timeline[:upto]
    text = canonical_json(_past_payload(t, events))
    while events and estimate_tokens(text) > budget.max_tokens:
        events = events[1:]  # drop oldest first
        budget.truncated = True
        text = canonical_json(_past_payload(t, events))
    return text


def has_icd_source(event: ClinicalEvent) -> bool:
    """A coded-diagnosis event: its source contains the substring 'ICD'."""
    return "ICD" in event.source


def lint_serialized_past(text: str) -> list[str]:
    """Corpus-level lint: report any ICD-source event inside a serialized past."""
    doc = json.loads(text)
    problems = []
    for i, ev in enumerate(doc.get("timeline", [])):
        if "ICD" in (ev.get("source") or ""):
            problems.append(f"event {i} has ICD source {ev.get('source')!r}")
    return problems
