from .types import (
    Axis,
    ALL_AXES,
    THEMES,
    AxisCoverageMissing,
    ClinicalQAPair,
    Criterion,
    EndpointUnavailable,
    FutureLeakDetected,
    NoPositiveCriteria,
    OracleConfig,
    Provenance,
    Rubric,
    SchemaViolation,
    SourceDetail,
    SourceNotInFuture,
    VerdictVector,
)
from .backends import (
    Backend,
    DeterministicOracleBackend,
    HttpBackend,
    ReplayBackend,
    ScriptedBackend,
    TransientBackendError,
    backend_for,
)
from .gateway import OracleGateway, is_degenerate, parse_rubric_response
from .prompts import fallback_rubric

__all__ = [
    "Axis",
    "ALL_AXES",
    "THEMES",
    "AxisCoverageMissing",
    "Backend",
    "ClinicalQAPair",
    "Criterion",
    "DeterministicOracleBackend",
    "EndpointUnavailable",
    "FutureLeakDetected",
    "HttpBackend",
    "NoPositiveCriteria",
    "OracleConfig",
    "OracleGateway",
    "Provenance",
    "ReplayBackend",
    "Rubric",
    "SchemaViolation",
    "ScriptedBackend",
    "SourceDetail",
    "SourceNotInFuture",
    "TransientBackendError",
    "VerdictVector",
    "backend_for",
    "fallback_rubric",
    "is_degenerate",
    "parse_rubric_response",
]
