"""Exact small-sample tests and intervals.

Binomial p-values are exact summations (no approximation below n = 1,000);
the Wilcoxon signed-rank test is exact for n <= 25 via the rank-sum
distribution (tied ranks handled by doubling to integers), normal
approximation with tie correction above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .types import StatResult

# two-sided 95% normal quantile
Z95 = 1.959963984540054

BINOMIAL_EXACT_LIMIT = 1000
WILCOXON_EXACT_LIMIT = 25


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; always inside [0, 1]."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes out of range")
    phat = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = phat + z2 / (2 * n)
    margin = z * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n))
    # boundary endpoints are exact; avoid float residue like 5e-17 at k=0
    low = 0.0 if successes == 0 else (centre - margin) / denom
    high = 1.0 if successes == n else (centre + margin) / denom
    return (max(0.0, low), min(1.0, high))


def _binom_pmf(k: int, n: int, p: Fraction) -> Fraction:
    return Fraction(math.comb(n, k)) * p**k * (1 - p) ** (n - k)


def exact_binomial_p(successes: int, n: int, p0: float = 0.5, alternative: str = "two-sided") -> float:
    """Exact binomial test p-value.

    two-sided uses the minimum-likelihood convention: sum P(x) over all x with
    P(x) <= P(observed).
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if n > BINOMIAL_EXACT_LIMIT:
        return _binomial_normal_p(successes, n, p0, alternative)
    p = Fraction(p0).limit_denominator(10**9)
    if alternative == "greater":
        total = sum(_binom_pmf(x, n, p) for x in range(successes, n + 1))
    elif alternative == "less":
        total = sum(_binom_pmf(x, n, p) for x in range(0, successes + 1))
    elif alternative == "two-sided":
        pk = _binom_pmf(successes, n, p)
        total = sum(
            pmf for x in range(n + 1) if (pmf := _binom_pmf(x, n, p)) <= pk
        )
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return float(min(Fraction(1), total))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _binomial_normal_p(k: int, n: int, p0: float, alternative: str) -> float:
    mu = n * p0
    sd = math.sqrt(n * p0 * (1 - p0))
    if alternative == "greater":
        return _normal_sf((k - 0.5 - mu) / sd)
    if alternative == "less":
        return 1.0 - _normal_sf((k + 0.5 - mu) / sd)
    z = (abs(k - mu) - 0.5) / sd
    return min(1.0, 2.0 * _normal_sf(z))


@dataclass
class WilcoxonResult:
    statistic: float
    p_value: float
    n_nonzero: int
    degenerate: bool
    method: str


def _mid_ranks(values: list[float]) -> list[float]:
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


def _exact_signed_rank_p(w_plus: float, ranks: list[float]) -> float:
    """Two-sided exact p via DP over the signed-rank distribution.

    Ranks are doubled so mid-ranks become integers; counts are exact.
    """
    scaled = [int(round(2 * r)) for r in ranks]
    total = sum(scaled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for s in scaled:
        for v in range(total, s - 1, -1):
            counts[v] += counts[v - s]
    denom = 2 ** len(ranks)
    w2 = int(round(2 * w_plus))
    p_ge = sum(counts[w2:]) / denom
    p_le = sum(counts[: w2 + 1]) / denom
    return min(1.0, 2.0 * min(p_ge, p_le))


def wilcoxon_signed_rank(x: list[float], y: list[float]) -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank; zeros dropped, ties mid-ranked."""
    if len(x) != len(y):
        raise ValueError("paired samples must have equal length")
    diffs = [a - b for a, b in zip(x, y) if a != b]
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n_nonzero=0, degenerate=True, method="degenerate")
    abs_diffs = [abs(d) for d in diffs]
    ranks = _mid_ranks(abs_diffs)
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)

    if n <= WILCOXON_EXACT_LIMIT:
        p = _exact_signed_rank_p(w_plus, ranks)
        return WilcoxonResult(statistic=w_plus, p_value=p, n_nonzero=n, degenerate=False, method="exact")

    mu = n * (n + 1) / 4.0
    # tie correction over groups of tied absolute differences
    tie_term = 0.0
    seen: dict[float, int] = {}
    for d in abs_diffs:
        seen[d] = seen.get(d, 0) + 1
    for t in seen.values():
        tie_term += t**3 - t
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    if var <= 0:
        return WilcoxonResult(statistic=w_plus, p_value=1.0, n_nonzero=n, degenerate=True, method="normal")
    z = (w_plus - mu) / math.sqrt(var)
    p = min(1.0, 2.0 * _normal_sf(abs(z)))
    return WilcoxonResult(statistic=w_plus, p_value=p, n_nonzero=n, degenerate=False, method="normal")


def proportion_result(successes: int, n: int, p0: float = 0.5,
                      alternative: str = "two-sided") -> StatResult:
    """Proportion with Wilson 95% CI and an exact binomial p-value."""
    if n == 0:
        return StatResult(value=0.0, n=0, degenerate=True)
    low, high = wilson_interval(successes, n)
    return StatResult(
        value=successes / n,
        ci_low=low,
        ci_high=high,
        p_value=exact_binomial_p(successes, n, p0, alternative),
        n=n,
    )
