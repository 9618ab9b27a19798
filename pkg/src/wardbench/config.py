"""Shared pipeline configuration: one JSON file, env overrides for secrets.

Every stage stamps its resolved config into its output artifact so a run can
be replayed against frozen upstream files.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any

from .merge import MergeConfig
from .oracle.types import OracleConfig

DEFAULT_SEED = 42

ENV_OVERRIDES = {
    "WARDBENCH_ORACLE_ENDPOINT": ("oracle", "endpoint"),
    "WARDBENCH_ORACLE_API_KEY": ("oracle", "api_key"),
    "WARDBENCH_MODEL_ENDPOINT": ("model", "endpoint"),
    "WARDBENCH_MODEL_API_KEY": ("model", "api_key"),
}


class ConfigError(ValueError):
    pass


@dataclass
class ModelEndpointConfig:
    endpoint: str = "mock://model"
    api_key: str = ""
    model: str = "candidate"
    family: str = "think-then-text"


@dataclass
class PipelineConfig:
    corpus_dir: str = "."
    output_dir: str = "out"
    seed: int = DEFAULT_SEED
    max_tokens: int = 65_536
    reward_profile: str = "canonical"
    splits_per_admission: int = 1
    oracle: OracleConfig = field(default_factory=OracleConfig)
    model: ModelEndpointConfig = field(default_factory=ModelEndpointConfig)
    merge: MergeConfig = field(default_factory=MergeConfig)
    serve_port: int = 8771
    serve_data_dir: str = "annotation-data"
    serve_tokens_file: str | None = None
    redisplay_probability: float = 0.0

    def resolved(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["oracle"]["api_key"] = "***" if self.oracle.api_key else ""
        doc["model"]["api_key"] = "***" if self.model.api_key else ""
        return doc


def load_config(path: str | None) -> PipelineConfig:
    doc: dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")

    for env_name, (section, key) in ENV_OVERRIDES.items():
        value = os.environ.get(env_name)
        if value:
            doc.setdefault(section, {})[key] = value

    try:
        cfg = PipelineConfig(
            **{k: v for k, v in doc.items() if k not in ("oracle", "model", "merge")}
        )
        if "oracle" in doc:
            cfg.oracle = OracleConfig(**doc["oracle"])
        if "model" in doc:
            cfg.model = ModelEndpointConfig(**doc["model"])
        if "merge" in doc:
            cfg.merge = MergeConfig(**doc["merge"])
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg
