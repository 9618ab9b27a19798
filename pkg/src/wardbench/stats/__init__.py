from .types import (
    AbDyad,
    AnnotatedCriterion,
    ConstantSeries,
    DisconnectedGraph,
    EmptyInput,
    InsufficientPairs,
    LengthMismatch,
    NoDecisive,
    NoDyads,
    RaggedMatrix,
    RubricAnnotation,
    StatResult,
)
from .tests import (
    Z95,
    WilcoxonResult,
    exact_binomial_p,
    proportion_result,
    wilcoxon_signed_rank,
    wilson_interval,
)
from .reliability import cohen_kappa, fleiss_kappa, krippendorff_alpha
from .alignment import judge_alignment, pooled_verdict, rubric_quality, score_alignment
from .preference import (
    ab_metrics,
    bradley_terry,
    bucket_of,
    effort_diagnostics,
    length_bias,
    nearest_rank,
    position_bias,
)
from .bootstrap import bootstrap_ci, spawn_rngs
from .report import analyze_export, case_scores, merge_dyads, parse_export, render_markdown, run_analysis

__all__ = [
    "AbDyad",
    "AnnotatedCriterion",
    "ConstantSeries",
    "DisconnectedGraph",
    "EmptyInput",
    "InsufficientPairs",
    "LengthMismatch",
    "NoDecisive",
    "NoDyads",
    "RaggedMatrix",
    "RubricAnnotation",
    "StatResult",
    "WilcoxonResult",
    "Z95",
    "ab_metrics",
    "analyze_export",
    "bootstrap_ci",
    "bradley_terry",
    "bucket_of",
    "case_scores",
    "cohen_kappa",
    "effort_diagnostics",
    "exact_binomial_p",
    "fleiss_kappa",
    "judge_alignment",
    "krippendorff_alpha",
    "length_bias",
    "merge_dyads",
    "nearest_rank",
    "parse_export",
    "pooled_verdict",
    "position_bias",
    "proportion_result",
    "render_markdown",
    "rubric_quality",
    "run_analysis",
    "score_alignment",
    "spawn_rngs",
    "wilcoxon_signed_rank",
    "wilson_interval",
]
