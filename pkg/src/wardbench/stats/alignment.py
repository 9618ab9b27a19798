"""Rubric curation quality and judge-vs-clinician alignment metrics.

The pooled clinician verdict is the strict majority across raters with even
splits resolved conservatively to Not-Accurate.  Judge alignment runs over
oracle-authored retained criteria only: clinician-added criteria carry no
oracle verdict to compare against.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..oracle.types import Axis
from .reliability import cohen_kappa
from .types import EmptyInput, RubricAnnotation, StatResult


def pooled_verdict(verdicts: Sequence[bool]) -> bool:
    """Strict majority; ties break to False."""
    if not verdicts:
        return False
    return sum(verdicts) * 2 > len(verdicts)


def rubric_quality(annos: list[RubricAnnotation]) -> dict[str, object]:
    if not annos:
        raise EmptyInput("no annotations")
    oracle_n = 0
    not_relevant = 0
    modified = 0
    added = 0
    invalid_cases = 0
    axis_cases: dict[str, int] = {a.value: 0 for a in Axis}
    for anno in annos:
        if anno.is_invalid:
            invalid_cases += 1
        oracle = anno.oracle_authored()
        oracle_n += len(oracle)
        not_relevant += sum(1 for c in oracle if c.not_relevant)
        modified += sum(1 for c in oracle if c.is_modified)
        added += sum(1 for c in anno.criteria if c.is_new)
        covered = {c.axis.value for c in anno.retained()}
        for a in covered:
            axis_cases[a] += 1
    if oracle_n == 0:
        raise EmptyInput("no oracle-authored criteria")
    return {
        "validity_rate": 1.0 - invalid_cases / len(annos),
        "relevance_rate": 1.0 - not_relevant / oracle_n,
        "modification_rate": modified / oracle_n,
        "addition_rate": added / oracle_n,
        "axis_coverage": {a: axis_cases[a] / len(annos) for a in axis_cases},
        "n_cases": len(annos),
        "n_oracle_criteria": oracle_n,
    }


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def judge_alignment(
    v_o: list[bool],
    v_c_per_rater: list[list[bool]],
    axes: list[Axis] | None = None,
) -> dict[str, object]:
    """Confusion metrics of oracle verdicts against the pooled clinician verdict."""
    if not v_o:
        raise EmptyInput("no verdicts")
    if any(len(v) != len(v_o) for v in v_c_per_rater):
        raise EmptyInput("rater vectors must align with oracle vector")
    v_c = [pooled_verdict([rv[i] for rv in v_c_per_rater]) for i in range(len(v_o))]

    tp = sum(1 for c, o in zip(v_c, v_o) if c and o)
    fp = sum(1 for c, o in zip(v_c, v_o) if not c and o)
    fn = sum(1 for c, o in zip(v_c, v_o) if c and not o)
    tn = sum(1 for c, o in zip(v_c, v_o) if not c and not o)
    n = len(v_o)

    pass_f1 = _f1(tp, fp, fn)
    fail_f1 = _f1(tn, fn, fp)  # fail class: swap roles
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0

    per_axis_f1: dict[str, float] = {}
    if axes is not None:
        for axis in Axis:
            idx = [i for i, a in enumerate(axes) if a is axis]
            if not idx:
                continue
            a_tp = sum(1 for i in idx if v_c[i] and v_o[i])
            a_fp = sum(1 for i in idx if not v_c[i] and v_o[i])
            a_fn = sum(1 for i in idx if v_c[i] and not v_o[i])
            a_tn = sum(1 for i in idx if not v_c[i] and not v_o[i])
            per_axis_f1[axis.value] = (_f1(a_tp, a_fp, a_fn) + _f1(a_tn, a_fn, a_fp)) / 2.0

    return {
        "accuracy": (tp + tn) / n,
        "precision": precision,
        "recall": recall,
        "f1": pass_f1,
        "balanced_f1": (pass_f1 + fail_f1) / 2.0,
        "kappa": cohen_kappa(v_o, v_c),
        "confusion": {"tp": tp, "fp": fp, "fn": fn, "tn": tn},
        "per_axis_f1": per_axis_f1,
        "n": n,
    }


def _rankdata(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.std() == 0 or ya.std() == 0:
        return None
    return float(np.corrcoef(xa, ya)[0, 1])


def score_alignment(oracle_scores: list[float], clinician_scores: list[float]) -> dict[str, object]:
    """MAE, Pearson r, and Spearman rho over paired per-case scalar scores."""
    if not oracle_scores or len(oracle_scores) != len(clinician_scores):
        raise EmptyInput("need paired non-empty score series")
    n = len(oracle_scores)
    mae = sum(abs(a - b) for a, b in zip(oracle_scores, clinician_scores)) / n
    pearson = _pearson(oracle_scores, clinician_scores)
    spearman = (
        _pearson(_rankdata(oracle_scores), _rankdata(clinician_scores))
        if pearson is not None
        else None
    )
    degenerate = pearson is None
    return {
        "mae": mae,
        "pearson": StatResult(value=pearson if pearson is not None else 0.0, n=n, degenerate=degenerate),
        "spearman": StatResult(value=spearman if spearman is not None else 0.0, n=n, degenerate=degenerate),
        "n": n,
    }
