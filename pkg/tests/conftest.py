from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import pytest

from wardbench.timeline import AdmissionTimeline, ClinicalEvent, admission_from_dict

BASE_TIME = datetime(2120, 3, 1, 8, 0, 0, tzinfo=timezone.utc)


def iso(hours: float) -> str:
    return (BASE_TIME + timedelta(hours=hours)).strftime("%Y-%m-%dT%H:%M:%S")


def make_event(hours: float, source: str = "labevents", table: str = "hosp.labevents",
               data: dict | None = None, descriptions: dict | None = None) -> dict:
    return {
        "time": iso(hours),
        "source": source,
        "table": table,
        "data": data or {"value": hours},
        "descriptions": descriptions or {},
    }


def make_admission_doc(
    subject_id: int = 100,
    hadm_id: int = 2000,
    n_events: int = 6,
    gender: str = "F",
    age: int = 67,
    icd_codes: list[tuple[str, str]] | None = None,
    dod: str | None = None,
    icd_event_indices: list[int] | None = None,
    start_hour: float = 0.0,
    height: float | None = None,
    weight: float | None = None,
) -> dict:
    events = []
    for i in range(n_events):
        source = "labevents"
        if icd_event_indices and i in icd_event_indices:
            source = "ICD_Diagnoses"
        events.append(make_event(start_hour + i, source=source))
    if height is not None:
        events.append(make_event(start_hour + n_events,
                                 source="omr", table="hosp.omr",
                                 data={"result_name": "Height (cm)", "result_value": height}))
    if weight is not None:
        events.append(make_event(start_hour + n_events + 1,
                                 source="omr", table="hosp.omr",
                                 data={"result_name": "Weight (kg)", "result_value": weight}))
    return {
        "subject_id": subject_id,
        "hadm_id": hadm_id,
        "demographics": {"gender": gender, "anchor_age": age, "anchor_year_group": "2117 - 2119"},
        "timeline": events,
        "misc": {
            "ED_triage": [{"acuity": 2}],
            "Patient": {"subject_id": subject_id, "gender": gender, "anchor_age": age, "dod": dod},
            "ICD_Diagnoses": [
                {"icd_code": code, "icd_version": ver, "long_title": f"dx {code}"}
                for code, ver in (icd_codes if icd_codes is not None else [("I10", "10")])
            ],
            "ICD_Procedures": [],
            "HCPCS": [],
        },
    }


def make_admission(**kwargs) -> AdmissionTimeline:
    return admission_from_dict(make_admission_doc(**kwargs))


@pytest.fixture
def admission() -> AdmissionTimeline:
    return make_admission()


@pytest.fixture
def small_corpus() -> list[AdmissionTimeline]:
    """Three structurally distinct admissions for pipeline smoke tests."""
    return [
        make_admission(subject_id=1, hadm_id=10, n_events=6, gender="F", age=74,
                       icd_codes=[("I10", "10"), ("E11", "10")]),
        make_admission(subject_id=2, hadm_id=20, n_events=8, gender="M", age=55,
                       icd_codes=[("J18", "10")], icd_event_indices=[1], height=172.0),
        make_admission(subject_id=3, hadm_id=30, n_events=5, gender="F", age=81,
                       icd_codes=[("I10", "10")], weight=64.0),
    ]


@pytest.fixture
def corpus_file(tmp_path, small_corpus):
    path = tmp_path / "corpus.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for adm in small_corpus:
            fh.write(json.dumps(adm.to_json()) + "\n")
    return path
