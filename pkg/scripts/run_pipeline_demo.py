#!/usr/bin/env python3
"""End-to-end demo on three synthetic admissions with the offline mock oracle.

Writes every stage artifact under ./demo-out and prints the final report.
Nothing touches the network; rerunning reproduces identical artifacts.
"""

from __future__ import annotations

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent.parent / "tests"))

from wardbench.cli import run


def make_admission(subject_id: int, hadm_id: int, n_events: int, gender: str, age: int,
                   icd_codes: list[tuple[str, str]], icd_event_indices=()) -> dict:
    events = []
    for i in range(n_events):
        source = "ICD_Diagnoses" if i in icd_event_indices else "labevents"
        events.append(
            {
                "time": f"2120-03-0{1 + i // 24}T{i % 24:02d}:00:00",
                "source": source,
                "table": f"hosp.{source.lower()}",
                "data": {"value": i, "label": "demo event"},
                "descriptions": {},
            }
        )
    return {
        "subject_id": subject_id,
        "hadm_id": hadm_id,
        "demographics": {"gender": gender, "anchor_age": age, "anchor_year_group": "2117 - 2119"},
        "timeline": events,
        "misc": {
            "ED_triage": [{"acuity": 2}],
            "Patient": {"subject_id": subject_id, "gender": gender, "anchor_age": age, "dod": None},
            "ICD_Diagnoses": [{"icd_code": c, "icd_version": v} for c, v in icd_codes],
            "ICD_Procedures": [],
            "HCPCS": [],
        },
    }


def main() -> int:
    out = pathlib.Path("demo-out")
    out.mkdir(exist_ok=True)
    raw = out / "raw.jsonl"
    admissions = [
        make_admission(1, 10, 6, "F", 74, [("I10", "10"), ("E11", "10")]),
        make_admission(2, 20, 8, "M", 55, [("J18", "10")], icd_event_indices=(1,)),
        make_admission(3, 30, 5, "F", 81, [("M48", "9")]),
    ]
    raw.write_text("\n".join(json.dumps(a) for a in admissions))

    stages = [
        ["ingest", str(raw), "--out", str(out / "corpus.jsonl")],
        ["cohort", "--corpus", str(out / "corpus.jsonl"), "--out", str(out / "manifest.json")],
        ["split", "--corpus", str(out / "corpus.jsonl"), "--manifest", str(out / "manifest.json"),
         "--out", str(out / "items.jsonl")],
        ["generate", "--items", str(out / "items.jsonl"), "--out", str(out / "datums.jsonl")],
        ["eval", "--datums", str(out / "datums.jsonl"),
         "--records-out", str(out / "records.jsonl"), "--report-out", str(out / "report.json")],
        ["report", "--records", str(out / "records.jsonl"), "--out", str(out / "report_replay.json")],
    ]
    for argv in stages:
        code = run(argv)
        if code != 0:
            print(f"stage {argv[0]} failed with exit code {code}", file=sys.stderr)
            return code

    report = json.loads((out / "report.json").read_text())["report"]
    print(json.dumps(report, indent=2))
    replay = (out / "report_replay.json").read_bytes()
    original = (out / "report.json").read_bytes()
    print("replay bit-identical:", replay == original)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
