"""Transport backends for oracle traffic.

A backend maps one chat-completion-shaped request dict to a response dict
with a ``content`` string.  The HTTP backend talks JSON-over-HTTP; the
scripted and deterministic backends keep the whole pipeline offline for
tests and demos.
"""

from __future__ import annotations

import hashlib
import json
import threading
from typing import Any, Callable, Protocol

from ..timeline import canonical_json


class Backend(Protocol):
    def complete(self, request: dict[str, Any]) -> dict[str, Any]: ...


def request_hash(request: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(request).encode("utf-8")).hexdigest()


class TransientBackendError(RuntimeError):
    """Retriable transport failure."""


class HttpBackend:
    """POST the request to a chat-completion endpoint; auth via bearer token."""

    def __init__(self, endpoint: str, api_key: str = "", timeout: float = 60.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, request: dict[str, Any]) -> dict[str, Any]:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(self.endpoint, json=request, headers=headers, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise TransientBackendError(str(exc)) from exc
        if resp.status_code >= 500:
            raise TransientBackendError(f"server error {resp.status_code}")
        if resp.status_code != 200:
            raise RuntimeError(f"endpoint returned {resp.status_code}: {resp.text[:200]}")
        doc = resp.json()
        # accept either the bare shape or the nested chat-completion shape
        if "content" in doc:
            return doc
        try:
            return {"content": doc["choices"][0]["message"]["content"]}
        except (KeyError, IndexError, TypeError) as exc:
            raise RuntimeError("response lacks content") from exc


class ScriptedBackend:
    """Pops canned responses in order; entries may be exceptions to raise."""

    def __init__(self, script: list[Any]):
        self.script = list(script)
        self.calls: list[dict[str, Any]] = []

    def complete(self, request: dict[str, Any]) -> dict[str, Any]:
        self.calls.append(request)
        if not self.script:
            raise TransientBackendError("script exhausted")
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        if isinstance(item, str):
            return {"content": item}
        return item


class ReplayBackend:
    """Replays stored responses keyed by the request hash (offline audit replay)."""

    def __init__(self, responses: dict[str, str]):
        self.responses = dict(responses)

    def complete(self, request: dict[str, Any]) -> dict[str, Any]:
        key = request_hash(request)
        if key not in self.responses:
            raise TransientBackendError(f"no canned response for request {key[:12]}")
        return {"content": self.responses[key]}


def _seed_from(request: dict[str, Any]) -> int:
    return int(request_hash(request)[:12], 16)


class DeterministicOracleBackend:
    """Fabricates schema-valid oracle responses from the request hash.

    Keeps the entire generate/grade pipeline runnable with no endpoint: the
    same request always produces the same bytes, so artifacts are replayable.
    """

    def complete(self, request: dict[str, Any]) -> dict[str, Any]:
        kind = request.get("metadata", {}).get("kind", "")
        if kind == "qa":
            return {"content": self._qa(request)}
        if kind == "rubric":
            return {"content": self._rubric(request)}
        if kind == "grade":
            return {"content": self._grade(request)}
        raise RuntimeError(f"unknown request kind {kind!r}")

    def _qa(self, request: dict[str, Any]) -> str:
        meta = request["metadata"]
        category = meta["category"]
        future_times = meta.get("future_times") or []
        time = future_times[0] if future_times else "2100-01-01T00:00:00"
        doc = {
            "question": f"Given the past timeline, what is the most appropriate next step for {category.lower()}?",
            "final_answer": f"Proceed with the {category.lower()} pathway supported by the recorded trajectory.",
            "answer_reasoning": "The past vitals, labs, and orders point to one coherent next action. "
            "First, the presenting signals are consistent. Then the recorded downstream event confirms the choice.",
            "action_space_category": category,
            "action_space_subcategory": None,
            "source": [
                {"event": "confirmatory downstream event", "time": time, "source": "transfers"}
            ],
        }
        return json.dumps(doc)

    def _rubric(self, request: dict[str, Any]) -> str:
        seed = _seed_from(request)
        axes = ["Accuracy", "Completeness", "CommunicationQuality", "ContextAwareness", "InstructionFollowing"]
        themes = [
            "Emergency Referrals", "Responding under Uncertainty", "Health Data Tasks",
            "Global Health", "Expertise-Specific Communication", "Context Seeking", "Response Depth",
        ]
        n_extra = seed % 3
        criteria = [
            {"axis": ax, "description": f"Addresses the {ax.lower()} expectation for this case (check {i + 1}).",
             "points": 4 + ((seed >> i) % 5)}
            for i, ax in enumerate(axes)
        ]
        for j in range(n_extra):
            criteria.append(
                {"axis": axes[(seed >> (5 + j)) % 5],
                 "description": f"Cites a concrete past-timeline signal in support (check {6 + j}).",
                 "points": 3 + j}
            )
        criteria.append(
            {"axis": "Accuracy", "description": "States a contraindicated intervention as appropriate.",
             "points": -6}
        )
        doc = {"meta": {"theme": themes[seed % len(themes)]}, "criteria": criteria}
        return json.dumps(doc)

    def _grade(self, request: dict[str, Any]) -> str:
        seed = _seed_from(request)
        ids = request["metadata"]["criterion_ids"]
        points = request["metadata"].get("criterion_points", {})
        verdicts = {}
        for i, cid in enumerate(ids):
            p = points.get(cid, 1)
            true_bias = 3 if p > 0 else 9  # negative criteria rarely trigger
            verdicts[cid] = ((seed >> (i % 48)) + i) % (true_bias + 1) != true_bias
            if p < 0:
                verdicts[cid] = ((seed >> (i % 48)) + i) % 10 == 0
        return json.dumps(verdicts)


class TranscriptWriter:
    """Appends request/response pairs as JSON-lines for audit."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()

    def record(self, request: dict[str, Any], response: dict[str, Any] | None, error: str | None) -> None:
        row = {"request_hash": request_hash(request), "request": request,
               "response": response, "error": error}
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(canonical_json(row) + "\n")


def backend_for(endpoint: str, api_key: str = "", timeout: float = 60.0) -> Backend:
    if endpoint.startswith("mock://"):
        return DeterministicOracleBackend()
    return HttpBackend(endpoint, api_key=api_key, timeout=timeout)
