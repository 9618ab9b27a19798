"""Persistence and HTTP API backing the annotation UI.

Storage is an append-only JSON-lines journal with atomic-rename compaction;
one live record per (rater, sample, type) key, drafts upserted in place and
promoted by finalize.  The API is a small threaded HTTP server with bearer
tokens mapping to rater ids.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlparse

from .timeline import canonical_json

SUBMISSION_TYPES = ("clinical_reasoning", "ab_clinical_reasoning")
KEY_SEGMENT = re.compile(r"^[A-Za-z0-9_.-]+$")
COMPACT_EVERY = 512


class SchemaViolation(ValueError):
    pass


class FinalizedRecordExists(ValueError):
    pass


class NoDraft(KeyError):
    pass


class GuardFailed(ValueError):
    def __init__(self, missing: list[str]):
        super().__init__(f"incomplete submission: {missing}")
        self.missing = missing


def record_key(rater_id: str, sample_id: str, submission_type: str) -> str:
    for segment in (rater_id, sample_id, submission_type):
        if not KEY_SEGMENT.match(segment):
            raise SchemaViolation(f"key segment {segment!r} has illegal characters")
    return f"{rater_id}~{sample_id}~{submission_type}"


def _validate_payload(submission_type: str, payload: dict[str, Any]) -> None:
    if submission_type == "clinical_reasoning":
        criteria = payload.get("criteria")
        if not isinstance(criteria, list) or not criteria:
            raise SchemaViolation("clinical_reasoning payload needs a criteria list")
        for c in criteria:
            if not isinstance(c, dict) or "criterion_id" not in c or "axis" not in c:
                raise SchemaViolation("criterion entries need criterion_id and axis")
    elif submission_type == "ab_clinical_reasoning":
        pairs = payload.get("pairs")
        if not isinstance(pairs, list) or len(pairs) != 3:
            raise SchemaViolation("ab payload needs exactly three pairs")
        for p in pairs:
            if not isinstance(p, dict) or "model_1" not in p or "model_2" not in p:
                raise SchemaViolation("pair entries need model_1 and model_2")
            if p.get("choice") is not None and p["choice"] not in ("m1", "m2", "tie"):
                raise SchemaViolation(f"bad choice {p.get('choice')!r}")
            display = p.get("display")
            if display:
                actual = {display.get("actualModelA"), display.get("actualModelB")}
                if actual != {p["model_1"], p["model_2"]}:
                    raise SchemaViolation("display mapping must be a bijection onto the pair")
    else:
        raise SchemaViolation(f"unknown submission type {submission_type!r}")


def _is_retained(c: dict[str, Any]) -> bool:
    if c.get("suitable") is False or c.get("not_relevant"):
        return False
    return True


def _finalize_guard(record: dict[str, Any]) -> None:
    payload = record["payload"]
    if record["submission_type"] == "clinical_reasoning":
        missing = []
        for c in payload["criteria"]:
            if c.get("suitable") is None and "not_relevant" not in c:
                missing.append(c["criterion_id"])  # no explicit Suitable/Not-Suitable
            elif _is_retained(c) and c.get("verdict") is None:
                missing.append(c["criterion_id"])  # retained but ungraded
        if missing:
            raise GuardFailed(sorted(set(missing)))
    else:
        missing = [
            f"pair{i + 1}" for i, p in enumerate(payload["pairs"]) if p.get("choice") is None
        ]
        if missing:
            raise GuardFailed(missing)
    if record.get("is_invalid") and not (record.get("invalid_reason") or "").strip():
        raise GuardFailed(["invalid_reason"])


@dataclass
class AnnotationStore:
    """Journal-backed record store; per-key writes serialized by one lock."""

    data_dir: str
    records: dict[str, dict[str, Any]] = field(default_factory=dict)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)
    _appends: int = 0

    def __post_init__(self) -> None:
        os.makedirs(self.data_dir, exist_ok=True)
        self._replay()

    @property
    def journal_path(self) -> str:
        return os.path.join(self.data_dir, "submissions.jsonl")

    def _replay(self) -> None:
        if not os.path.exists(self.journal_path):
            return
        with open(self.journal_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    record = json.loads(line)
                    self.records[record["key"]] = record

    def _append(self, record: dict[str, Any]) -> None:
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(canonical_json(record) + "\n")
        self._appends += 1
        if self._appends >= COMPACT_EVERY:
            self.compact()

    def compact(self) -> None:
        """Rewrite the journal to one line per live record, atomically."""
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=self.data_dir, suffix=".jsonl")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                for key in sorted(self.records):
                    fh.write(canonical_json(self.records[key]) + "\n")
            os.replace(tmp, self.journal_path)
            self._appends = 0

    def upsert_draft(self, sub: dict[str, Any]) -> dict[str, Any]:
        """Create or replace the draft for (rater, sample, type)."""
        required = ("rater_id", "experiment_id", "patient_id", "sample_id", "submission_type", "payload")
        for name in required:
            if name not in sub:
                raise SchemaViolation(f"submission missing {name}")
        submission_type = sub["submission_type"]
        _validate_payload(submission_type, sub["payload"])
        if sub.get("is_invalid") and not (sub.get("invalid_reason") or "").strip():
            raise SchemaViolation("invalid submissions require a free-text reason")
        key = record_key(str(sub["rater_id"]), str(sub["sample_id"]), submission_type)
        now = time.time()
        with self._lock:
            existing = self.records.get(key)
            if existing and not existing["is_draft"]:
                raise FinalizedRecordExists(key)
            interaction = int(
                sub.get("results_metadata", {}).get("interaction_count", 0)
            )
            if existing:
                interaction = max(
                    interaction, existing["results_metadata"]["interaction_count"]
                )
            record = {
                "key": key,
                "rater_id": str(sub["rater_id"]),
                "experiment_id": str(sub["experiment_id"]),
                "patient_id": str(sub["patient_id"]),
                "sample_id": str(sub["sample_id"]),
                "submission_type": submission_type,
                "payload": sub["payload"],
                "cohort": sub.get("cohort", ""),
                "is_invalid": bool(sub.get("is_invalid", False)),
                "invalid_reason": sub.get("invalid_reason"),
                "results_metadata": {"interaction_count": interaction},
                "is_draft": True,
                "created_at": existing["created_at"] if existing else now,
                "updated_at": now,
            }
            self.records[key] = record
            self._append(record)
            return record

    def finalize(self, key: str) -> dict[str, Any]:
        with self._lock:
            record = self.records.get(key)
            if record is None:
                raise NoDraft(key)
            if not record["is_draft"]:
                return record  # already final; idempotent
            _finalize_guard(record)
            record = dict(record, is_draft=False, updated_at=time.time())
            self.records[key] = record
            self._append(record)
            return record

    def get(self, key: str) -> dict[str, Any] | None:
        with self._lock:
            return self.records.get(key)

    def export(self, experiment_id: str | None = None) -> list[dict[str, Any]]:
        """Finalized records, order-normalized by key; invalid rows keep flags."""
        with self._lock:
            rows = [
                r
                for r in self.records.values()
                if not r["is_draft"]
                and (experiment_id is None or r["experiment_id"] == experiment_id)
            ]
        return sorted(rows, key=lambda r: r["key"])


@dataclass
class CaseLibrary:
    """Read-only case corpus served to the UI, filterable by cohort/keyword."""

    cases: list[dict[str, Any]] = field(default_factory=list)

    @classmethod
    def load(cls, data_dir: str) -> "CaseLibrary":
        path = os.path.join(data_dir, "cases.jsonl")
        cases = []
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        cases.append(json.loads(line))
        return cls(cases=cases)

    def query(self, cohort: str | None = None, keyword: str | None = None) -> list[dict[str, Any]]:
        out = []
        for case in self.cases:
            if cohort and case.get("cohort") != cohort:
                continue
            if keyword:
                timeline_text = case.get("timeline_text") or json.dumps(case.get("timeline", ""))
                if keyword.lower() not in timeline_text.lower():
                    continue
            out.append(case)
        return out

    def get(self, case_id: str) -> dict[str, Any] | None:
        for case in self.cases:
            if str(case.get("case_id")) == case_id:
                return case
        return None


def load_tokens(path: str | None) -> dict[str, str]:
    """token -> rater_id map from a JSON file; empty means open access."""
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return {str(token): str(rater) for token, rater in doc.items()}


def redisplay_pairs(case_id: str, n_pairs: int, probability: float) -> list[int]:
    """Deterministic per-case re-display schedule for self-consistency probes."""
    if probability <= 0:
        return []
    import hashlib

    out = []
    for pair_no in range(n_pairs):
        digest = hashlib.sha256(f"{case_id}:{pair_no}".encode("utf-8")).digest()
        if int.from_bytes(digest[:8], "big") / 2**64 < probability:
            out.append(pair_no)
    return out


class _Handler(BaseHTTPRequestHandler):
    store: AnnotationStore
    library: CaseLibrary
    tokens: dict[str, str]
    redisplay_probability: float = 0.0

    def log_message(self, fmt: str, *args: Any) -> None:  # quiet server
        pass

    def _send(self, status: int, doc: Any) -> None:
        body = canonical_json(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def _rater(self) -> str | None:
        if not self.tokens:
            return "*"
        auth = self.headers.get("Authorization", "")
        if auth.startswith("Bearer "):
            return self.tokens.get(auth[len("Bearer ") :].strip())
        return None

    def _body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        return json.loads(raw.decode("utf-8"))

    def do_OPTIONS(self) -> None:  # CORS preflight for the browser UI
        self._send(200, {})

    def do_GET(self) -> None:
        rater = self._rater()
        if rater is None:
            self._send(401, {"error": "missing or unknown bearer token"})
            return
        url = urlparse(self.path)
        params = {k: v[0] for k, v in parse_qs(url.query).items()}
        if url.path == "/cases":
            cases = self.library.query(cohort=params.get("cohort"), keyword=params.get("keyword"))
            if self.redisplay_probability > 0:
                cases = [
                    dict(c, redisplay_pairs=redisplay_pairs(
                        str(c.get("case_id")), len(c.get("pairs", [])) or 3,
                        self.redisplay_probability))
                    for c in cases
                ]
            self._send(200, {"cases": cases})
        elif url.path.startswith("/cases/"):
            case = self.library.get(url.path[len("/cases/") :])
            if case is None:
                self._send(404, {"error": "no such case"})
            else:
                self._send(200, case)
        elif url.path == "/export":
            rows = self.store.export(params.get("experiment"))
            self._send(200, {"rows": rows})
        elif url.path == "/submissions":
            key = params.get("key")
            record = self.store.get(key) if key else None
            if record is None:
                self._send(404, {"error": "no such record"})
            else:
                self._send(200, record)
        else:
            self._send(404, {"error": "unknown path"})

    def do_PUT(self) -> None:
        rater = self._rater()
        if rater is None:
            self._send(401, {"error": "missing or unknown bearer token"})
            return
        url = urlparse(self.path)
        if url.path != "/submissions":
            self._send(404, {"error": "unknown path"})
            return
        try:
            sub = self._body()
            if rater != "*" and str(sub.get("rater_id")) != rater:
                self._send(403, {"error": "token does not match rater_id"})
                return
            record = self.store.upsert_draft(sub)
            self._send(200, record)
        except FinalizedRecordExists as exc:
            self._send(409, {"error": str(exc)})
        except (SchemaViolation, json.JSONDecodeError) as exc:
            self._send(400, {"error": str(exc)})

    def do_POST(self) -> None:
        rater = self._rater()
        if rater is None:
            self._send(401, {"error": "missing or unknown bearer token"})
            return
        url = urlparse(self.path)
        m = re.match(r"^/submissions/([^/]+)/finalize$", url.path)
        if not m:
            self._send(404, {"error": "unknown path"})
            return
        key = m.group(1)
        if rater != "*" and not key.startswith(f"{rater}~"):
            self._send(403, {"error": "token does not own this record"})
            return
        try:
            record = self.store.finalize(key)
            self._send(200, record)
        except NoDraft:
            self._send(404, {"error": f"no draft for {key}"})
        except GuardFailed as exc:
            self._send(409, {"error": str(exc), "missing": exc.missing})


def make_server(
    port: int,
    data_dir: str,
    tokens_file: str | None = None,
    redisplay_probability: float = 0.0,
) -> tuple[ThreadingHTTPServer, AnnotationStore]:
    store = AnnotationStore(data_dir=data_dir)
    library = CaseLibrary.load(data_dir)
    tokens = load_tokens(tokens_file)
    handler = type(
        "Handler",
        (_Handler,),
        {"store": store, "library": library, "tokens": tokens,
         "redisplay_probability": redisplay_probability},
    )
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    return server, store


def serve(port: int, data_dir: str, tokens_file: str | None = None,
          redisplay_probability: float = 0.0) -> None:
    server, _store = make_server(port, data_dir, tokens_file, redisplay_probability)
    try:
        server.serve_forever()
    finally:
        server.server_close()
