"""Oracle-judge gateway: query/reference generation, rubric synthesis, grading.

All endpoint traffic funnels through here: prompt assembly, schema
validation, the three-attempt retry discipline with exponential backoff, the
degenerate-output short circuit, and transcript persistence.
"""

from __future__ import annotations

import json
import random
import re
import time as time_mod
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, TypeVar

from ..actionspaces import ActionSpace
from ..splitter import SplitItem
from ..timeline import parse_time
from . import prompts
from .backends import Backend, TransientBackendError, TranscriptWriter
from .types import (
    Axis,
    ClinicalQAPair,
    Criterion,
    EndpointUnavailable,
    FutureLeakDetected,
    OracleConfig,
    Provenance,
    Rubric,
    SchemaViolation,
    SourceNotInFuture,
    VerdictVector,
)

T = TypeVar("T")

# a candidate this repetitive is graded all-false without an endpoint call
DEGENERACY_MIN_TOKENS = 60
DEGENERACY_TRIGRAM_RATIO = 0.1

FUTURE_LEAK_PATTERN = re.compile(r"future\s+timeline", re.IGNORECASE)


class OracleGateway:
    def __init__(self, backend: Backend, cfg: OracleConfig | None = None):
        self.backend = backend
        self.cfg = cfg or OracleConfig()
        self.transcript = (
            TranscriptWriter(self.cfg.transcript_path) if self.cfg.transcript_path else None
        )
        self.retry_count = 0

    # -- transport ---------------------------------------------------------

    def _sleep(self, attempt: int) -> None:
        base = self.cfg.backoff_base * (2**attempt)
        if base <= 0:
            return
        jitter = 1.0 + random.uniform(-self.cfg.backoff_jitter, self.cfg.backoff_jitter)
        time_mod.sleep(base * jitter)

    def _call(self, request: dict[str, Any], parse: Callable[[str], T]) -> T:
        """Call with up to cfg.max_retries attempts; backoff between failures."""
        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries):
            if attempt:
                self._sleep(attempt - 1)
                self.retry_count += 1
            try:
                response = self.backend.complete(request)
                result = parse(response["content"])
            except (TransientBackendError, SchemaViolation) as exc:
                last_error = exc
                if self.transcript:
                    self.transcript.record(request, None, f"{type(exc).__name__}: {exc}")
                continue
            if self.transcript:
                self.transcript.record(request, response, None)
            return result
        if isinstance(last_error, SchemaViolation):
            raise last_error
        raise EndpointUnavailable(str(last_error))

    def map_concurrent(self, fn: Callable[[T], Any], items: Iterable[T]) -> list[Any]:
        """Run fn over items with at most cfg.max_in_flight concurrent calls."""
        with ThreadPoolExecutor(max_workers=max(1, self.cfg.max_in_flight)) as pool:
            return list(pool.map(fn, items))

    # -- stage 1: query + reference ----------------------------------------

    def generate_qa(self, item: SplitItem, cat: ActionSpace) -> ClinicalQAPair:
        request = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompts.build_qa_prompt(item, cat)}],
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "top_k": self.cfg.top_k,
            "response_format": {"type": "json_object"},
            "metadata": {
                "kind": "qa",
                "category": cat.category.value,
                "item": [item.subject_id, item.hadm_id, item.spec.seed],
                "future_times": [e.time for e in item.future[:3]],
            },
        }

        def parse(content: str) -> ClinicalQAPair:
            qa = ClinicalQAPair.from_dict(_json_object(content))
            _validate_sources(qa, item)
            return qa

        return self._call(request, parse)

    # -- stage 2: rubric synthesis -----------------------------------------

    def generate_rubric(self, item: SplitItem, qa: ClinicalQAPair) -> Rubric:
        request = {
            "model": self.cfg.model,
            "messages": [
                {"role": "user", "content": prompts.build_rubric_prompt(item, qa, self.cfg.theme_exemplars)}
            ],
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "top_k": self.cfg.top_k,
            "response_format": {"type": "json_object"},
            "metadata": {
                "kind": "rubric",
                "item": [item.subject_id, item.hadm_id, item.spec.seed],
                "category": qa.action_space_category,
            },
        }
        return self._call(request, parse_rubric_response)

    # -- grading -------------------------------------------------------------

    def grade(
        self,
        candidate: str,
        item: SplitItem,
        qa: ClinicalQAPair,
        rubric: Rubric,
        reasoning: str | None = None,
        answer: str | None = None,
    ) -> VerdictVector:
        if reasoning is None and answer is None:
            reasoning, answer = _split_candidate(candidate)
        if is_degenerate(candidate, reasoning, answer):
            return VerdictVector.all_false(rubric, degenerate=True)

        request = {
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": prompts.GRADER_SYSTEM_PROMPT},
                {"role": "user", "content": prompts.build_grader_prompt(item, qa, rubric, candidate)},
            ],
            "temperature": self.cfg.grading_temperature,
            "response_format": {"type": "json_object"},
            "metadata": {
                "kind": "grade",
                "item": [item.subject_id, item.hadm_id, item.spec.seed],
                "category": qa.action_space_category,
                "criterion_ids": rubric.ids,
                "criterion_points": {c.id: c.points for c in rubric.criteria},
            },
        }

        def parse(content: str) -> VerdictVector:
            doc = _json_object(content)
            if set(doc) != set(rubric.ids):
                raise SchemaViolation(
                    f"verdict keys {sorted(doc)} do not equal rubric ids {sorted(rubric.ids)}"
                )
            if not all(isinstance(v, bool) for v in doc.values()):
                raise SchemaViolation("verdict values must be booleans")
            return VerdictVector(verdicts={k: doc[k] for k in rubric.ids})

        return self._call(request, parse)

    def fallback_rubric(self) -> Rubric:
        return prompts.fallback_rubric()


# -- helpers ----------------------------------------------------------------


def _json_object(content: str) -> dict[str, Any]:
    text = content.strip()
    if text.startswith("```"):
        text = re.sub(r"^```(?:json)?\s*|\s*```$", "", text, flags=re.DOTALL)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"response is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("response must be a JSON object")
    return doc


def _validate_sources(qa: ClinicalQAPair, item: SplitItem) -> None:
    """Every cited source must fall inside [split time, last future event]."""
    if not item.future:
        raise SchemaViolation("item has no future window to cite")
    lo = parse_time(item.spec.split_time)
    hi = item.future[-1].instant
    for s in qa.source:
        t = parse_time(s.time)
        if t is None:
            raise SourceNotInFuture(f"unparseable source time {s.time!r}")
        if lo is not None and (t < lo or t > hi):
            raise SourceNotInFuture(f"source time {s.time} outside future window")


def normalize_description(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().strip(".").lower()


def parse_rubric_response(content: str) -> Rubric:
    doc = _json_object(content)
    try:
        theme = doc["meta"]["theme"]
        raw = doc["criteria"]
    except (KeyError, TypeError) as exc:
        raise SchemaViolation(f"rubric missing field: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise SchemaViolation("rubric criteria must be a non-empty list")

    criteria: list[Criterion] = []
    seen: set[str] = set()
    for c in raw:
        try:
            axis = Axis(c["axis"])
            description = str(c["description"])
            points = c["points"]
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaViolation(f"bad criterion: {exc}") from exc
        if not isinstance(points, int) or isinstance(points, bool):
            raise SchemaViolation(f"criterion points must be an integer, got {points!r}")
        if FUTURE_LEAK_PATTERN.search(description):
            raise FutureLeakDetected(description)
        key = normalize_description(description)
        if key in seen:
            continue  # de-duplication pass
        seen.add(key)
        criteria.append(Criterion(axis=axis, description=description, points=points))

    for i, c in enumerate(criteria):
        c.id = f"c{i + 1}"
    return Rubric(theme=theme, criteria=criteria)


def _split_candidate(candidate: str) -> tuple[str, str]:
    """Best-effort think/answer split when the caller supplies none."""
    m = re.search(r"<think>(.*?)</think>(.*)", candidate, re.DOTALL)
    if m:
        reasoning, rest = m.group(1), m.group(2)
        am = re.search(r"<answer>(.*?)</answer>", rest, re.DOTALL)
        return reasoning.strip(), (am.group(1) if am else rest).strip()
    return "", candidate.strip()


def trigram_uniqueness(text: str) -> tuple[int, float]:
    """(token count, unique-trigram ratio); ratio is 1.0 when too short to tell."""
    tokens = text.split()
    if len(tokens) < 3:
        return len(tokens), 1.0
    grams = list(zip(tokens, tokens[1:], tokens[2:]))
    return len(tokens), len(set(grams)) / len(grams)


def is_degenerate(candidate: str, reasoning: str | None = None, answer: str | None = None) -> bool:
    """Empty reasoning+answer, or trivially repetitive text."""
    if reasoning is None and answer is None:
        reasoning, answer = _split_candidate(candidate)
    if not (reasoning or "").strip() and not (answer or "").strip():
        return True
    n_tokens, ratio = trigram_uniqueness(candidate)
    return n_tokens >= DEGENERACY_MIN_TOKENS and ratio < DEGENERACY_TRIGRAM_RATIO
