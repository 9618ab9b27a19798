"""Inter-rater reliability: Cohen's kappa, Fleiss' kappa, Krippendorff's alpha.

All three are defined over binary (nominal) verdicts.  When chance agreement
is total (everyone constant on the same value) the coefficient is undefined;
those cases come back flagged degenerate with value 0 rather than raising.
"""

from __future__ import annotations

from collections import Counter

from .types import InsufficientPairs, LengthMismatch, RaggedMatrix, StatResult


def cohen_kappa(v1: list[bool], v2: list[bool]) -> StatResult:
    """kappa = (P_o - P_e) / (1 - P_e) with product-of-marginals chance agreement."""
    if len(v1) != len(v2):
        raise LengthMismatch(f"{len(v1)} vs {len(v2)}")
    if not v1:
        raise LengthMismatch("vectors must be non-empty")
    n = len(v1)
    p_o = sum(1 for a, b in zip(v1, v2) if a == b) / n
    p_e = 0.0
    for value in (True, False):
        p_e += (sum(1 for a in v1 if a == value) / n) * (sum(1 for b in v2 if b == value) / n)
    if p_e == 1.0:
        return StatResult(value=0.0, n=n, degenerate=True)
    return StatResult(value=(p_o - p_e) / (1.0 - p_e), n=n)


def fleiss_kappa(matrix: list[list[bool]]) -> StatResult:
    """Fleiss' kappa over two categories; every item needs the same rater count."""
    if not matrix:
        raise RaggedMatrix("matrix must be non-empty")
    m = len(matrix[0])
    if m < 2 or any(len(row) != m for row in matrix):
        raise RaggedMatrix("every item needs the same rater count >= 2")
    n = len(matrix)
    p_true = sum(sum(row) for row in matrix) / (n * m)
    p_e = p_true**2 + (1 - p_true) ** 2
    p_bar = 0.0
    for row in matrix:
        t = sum(row)
        f = m - t
        p_bar += (t * (t - 1) + f * (f - 1)) / (m * (m - 1))
    p_bar /= n
    if p_e == 1.0:
        return StatResult(value=0.0, n=n, degenerate=True)
    return StatResult(value=(p_bar - p_e) / (1.0 - p_e), n=n)


def krippendorff_alpha(values: list[list[bool | None]]) -> StatResult:
    """Nominal-metric Krippendorff's alpha; None marks a missing rating.

    Built on the coincidence matrix: each pairable unit contributes
    1/(m_u - 1) per ordered pair of its ratings.
    """
    pairable_units = [
        [v for v in row if v is not None] for row in values
    ]
    pairable_units = [u for u in pairable_units if len(u) >= 2]
    n_pairable = sum(len(u) for u in pairable_units)
    if n_pairable < 2:
        raise InsufficientPairs("need at least two pairable values")

    coincidence: Counter[tuple[bool, bool]] = Counter()
    for unit in pairable_units:
        m_u = len(unit)
        for i, a in enumerate(unit):
            for j, b in enumerate(unit):
                if i != j:
                    coincidence[(a, b)] += 1.0 / (m_u - 1)

    n_c: Counter[bool] = Counter()
    for (a, _b), w in coincidence.items():
        n_c[a] += w
    n_total = sum(n_c.values())

    d_o = sum(w for (a, b), w in coincidence.items() if a != b)
    d_e = sum(
        n_c[a] * n_c[b] for a in (True, False) for b in (True, False) if a != b
    ) / (n_total - 1)
    if d_e == 0:
        return StatResult(value=0.0, n=int(round(n_total)), degenerate=True)
    return StatResult(value=1.0 - d_o / d_e, n=int(round(n_total)))
