"""Candidate-model endpoint client with a deterministic offline mock."""

from __future__ import annotations

import hashlib
from typing import Any, Callable

from .config import ModelEndpointConfig
from .timeline import canonical_json

ModelFn = Callable[[dict[str, Any]], str]


def _mock_completion(request: dict[str, Any]) -> str:
    digest = hashlib.sha256(canonical_json(request).encode("utf-8")).hexdigest()
    seed = int(digest[:8], 16)
    question = request.get("question", "")
    steps = [
        "First, I review the presenting vitals and labs in the past timeline.",
        "Then I weigh the candidate diagnoses against the recorded orders.",
        "Finally I choose the action best supported by the documented course.",
    ]
    think = " ".join(steps[: 1 + seed % 3])
    answer = (
        f"Recommended next step (variant {seed % 7}): proceed per the pathway implied by "
        f"the question '{question[:80]}' with explicit monitoring and documented rationale."
    )
    return f"<think>{think}</think>{answer}"


def _http_model(cfg: ModelEndpointConfig) -> ModelFn:
    def call(request: dict[str, Any]) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"
        payload = {
            "model": cfg.model,
            "messages": [{"role": "user", "content": canonical_json(request)}],
            "temperature": request.get("temperature", 0.2),
            "max_tokens": request.get("max_new_tokens", 4096),
        }
        resp = httpx.post(cfg.endpoint, json=payload, headers=headers, timeout=120)
        resp.raise_for_status()
        doc = resp.json()
        if "content" in doc:
            return doc["content"]
        return doc["choices"][0]["message"]["content"]

    return call


def model_fn_for(cfg: ModelEndpointConfig) -> ModelFn:
    if cfg.endpoint.startswith("mock://"):
        return _mock_completion
    return _http_model(cfg)
