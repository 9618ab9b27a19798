"""Blinded A/B preference analytics: win rates, consensus buckets, bias and
effort diagnostics, and Bradley-Terry strengths.

Dyad bucketing: strict = both raters decisive on the same arm; semi = one
decisive + one tie; single = only one rater submitted; non-consensus = both
rated but no decisive agreement (decisive disagreement or double tie).
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Any, Iterable

import numpy as np

from .bootstrap import spawn_rngs
from .tests import exact_binomial_p, wilson_interval
from .types import AbDyad, DisconnectedGraph, NoDecisive, NoDyads, StatResult

BUCKETS = ("strict", "semi", "single", "non_consensus")


def _primary_dyads(dyads: Iterable[AbDyad]) -> list[AbDyad]:
    return [d for d in dyads if not d.is_redisplay]


def bucket_of(dyad: AbDyad) -> str:
    choices = list(dyad.choices.values())
    decisive = [c for c in choices if c != "tie"]
    if len(choices) <= 1:
        return "single"
    if len(decisive) == len(choices) and len(set(decisive)) == 1:
        return "strict"
    if len(decisive) == len(choices) - 1 and len(set(decisive)) == 1:
        return "semi"
    return "non_consensus"


def ab_metrics(dyads: list[AbDyad], consensus_mode: str = "all-decisive",
               bonferroni_arms: int | None = None) -> dict[str, Any]:
    """Per-pair win/tie rates with Wilson CIs and one-sided exact binomial tests.

    all-decisive pools every rater's verdict; strict-consensus counts each
    unanimously decisive dyad once.
    """
    dyads = _primary_dyads(dyads)
    if not dyads:
        raise NoDyads("no dyads")
    if consensus_mode not in ("all-decisive", "strict-consensus"):
        raise ValueError(f"unknown consensus mode {consensus_mode!r}")

    by_pair: dict[tuple[str, str], list[AbDyad]] = defaultdict(list)
    for d in dyads:
        by_pair[d.pair].append(d)
    arms = bonferroni_arms if bonferroni_arms is not None else len(by_pair)

    report: dict[str, Any] = {}
    for pair, rows in sorted(by_pair.items()):
        w1 = w2 = t = 0
        buckets = {b: 0 for b in BUCKETS}
        for d in rows:
            buckets[bucket_of(d)] += 1
            if consensus_mode == "all-decisive":
                for choice in d.choices.values():
                    if choice == "m1":
                        w1 += 1
                    elif choice == "m2":
                        w2 += 1
                    else:
                        t += 1
            else:
                if bucket_of(d) == "strict":
                    choice = next(iter(d.choices.values()))
                    if choice == "m1":
                        w1 += 1
                    else:
                        w2 += 1
        total = w1 + w2 + t
        decisive = w1 + w2
        win_rate = w1 / total if total else 0.0
        tie_rate = t / total if total else 0.0
        if decisive:
            ci = wilson_interval(w1, decisive)
            p_raw = exact_binomial_p(w1, decisive, 0.5, alternative="greater")
            p_adj = min(1.0, p_raw * max(1, arms))
        else:
            ci, p_raw, p_adj = (0.0, 1.0), None, None
        report[f"{pair[0]} vs {pair[1]}"] = {
            "pair": list(pair),
            "mode": consensus_mode,
            "wins_m1": w1,
            "wins_m2": w2,
            "ties": t,
            "n": total,
            "n_decisive": decisive,
            "win_rate": win_rate,
            "tie_rate": tie_rate,
            "decisive_win_rate": (w1 / decisive) if decisive else None,
            "wilson_ci": list(ci),
            "binomial_p": p_raw,
            "binomial_p_bonferroni": p_adj,
            "bucket_counts": buckets,
            "degenerate": decisive == 0,
        }
    return report


def position_bias(dyads: list[AbDyad]) -> StatResult:
    """Left-pane preference rate over decisive verdicts + two-sided exact binomial."""
    dyads = _primary_dyads(dyads)
    left = 0
    n = 0
    for d in dyads:
        if not d.display:
            continue
        left_model = d.display.get("actualModelA")
        for rater in d.choices:
            chosen = d.chosen_model(rater)
            if chosen is None:
                continue
            n += 1
            if chosen == left_model:
                left += 1
    if n == 0:
        raise NoDecisive("no decisive verdicts with display mapping")
    low, high = wilson_interval(left, n)
    return StatResult(
        value=left / n,
        ci_low=low,
        ci_high=high,
        p_value=exact_binomial_p(left, n, 0.5, alternative="two-sided"),
        n=n,
    )


def length_bias(dyads: list[AbDyad]) -> StatResult:
    """Fraction of decisive verdicts preferring the longer response."""
    dyads = _primary_dyads(dyads)
    longer = 0
    n = 0
    for d in dyads:
        if d.lengths[0] == d.lengths[1]:
            continue  # equal lengths are excluded
        longer_model = d.pair[0] if d.lengths[0] > d.lengths[1] else d.pair[1]
        for rater in d.choices:
            chosen = d.chosen_model(rater)
            if chosen is None:
                continue
            n += 1
            if chosen == longer_model:
                longer += 1
    if n == 0:
        return StatResult(value=0.0, n=0, degenerate=True)
    low, high = wilson_interval(longer, n)
    return StatResult(value=longer / n, ci_low=low, ci_high=high,
                      p_value=exact_binomial_p(longer, n, 0.5), n=n)


def nearest_rank(sorted_values: list[float], p: float) -> float:
    """Nearest-rank percentile: smallest value with cumulative share >= p."""
    if not sorted_values:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(p * len(sorted_values)))
    return sorted_values[rank - 1]


def effort_diagnostics(dyads: list[AbDyad]) -> dict[str, Any]:
    """Per-rater verdict counts, tie rates, decision-time percentiles, revisions."""
    primary = _primary_dyads(dyads)
    redisplays = [d for d in dyads if d.is_redisplay]

    per_rater: dict[str, dict[str, Any]] = {}
    raters = sorted({r for d in dyads for r in d.choices})
    original_choice = {
        (d.case_id, d.pair, r): c for d in primary for r, c in d.choices.items()
    }
    for rater in raters:
        times = sorted(
            d.decision_time_seconds[rater]
            for d in primary
            if rater in d.decision_time_seconds and rater in d.choices
        )
        choices = [c for d in primary for r, c in d.choices.items() if r == rater]
        revisions = 0
        for d in redisplays:
            if rater not in d.choices:
                continue
            first = original_choice.get((d.case_id, d.pair, rater))
            if first is not None and d.choices[rater] != first:
                revisions += 1
        per_rater[rater] = {
            "n": len(choices),
            "tie_rate": (sum(1 for c in choices if c == "tie") / len(choices)) if choices else 0.0,
            "median_s": nearest_rank(times, 0.5) if times else None,
            "p75_s": nearest_rank(times, 0.75) if times else None,
            "p90_s": nearest_rank(times, 0.90) if times else None,
            "revisions": revisions,
        }
    return per_rater


def _bt_strengths(wins: dict[tuple[str, str], int], models: list[str],
                  tol: float = 1e-8, max_iter: int = 10_000) -> dict[str, float]:
    """Bradley-Terry MLE via minorization-maximization; strengths sum to 1."""
    index = {m: i for i, m in enumerate(models)}
    k = len(models)
    w = np.zeros((k, k))
    for (a, b), count in wins.items():
        w[index[a], index[b]] += count
    n = w + w.T
    total_wins = w.sum(axis=1)
    pi = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        denom = np.zeros(k)
        for i in range(k):
            for j in range(k):
                if i != j and n[i, j] > 0:
                    denom[i] += n[i, j] / (pi[i] + pi[j])
        new_pi = np.where(denom > 0, total_wins / np.maximum(denom, 1e-300), pi)
        new_pi = np.maximum(new_pi, 1e-300)
        new_pi /= new_pi.sum()
        if np.max(np.abs(new_pi - pi) / np.maximum(pi, 1e-300)) < tol:
            pi = new_pi
            break
        pi = new_pi
    return {m: float(pi[index[m]]) for m in models}


def _connected(models: list[str], edges: set[tuple[str, str]]) -> bool:
    if not models:
        return False
    adj: dict[str, set[str]] = {m: set() for m in models}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = {models[0]}
    stack = [models[0]]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(models)


def bradley_terry(dyads: list[AbDyad], bootstrap: int = 200, seed: int = 42) -> dict[str, Any]:
    """Per-model strengths plus bootstrap rank intervals over dyads.

    Ties carry no pairwise information under the classic model and are dropped.
    """
    dyads = _primary_dyads(dyads)
    wins: dict[tuple[str, str], int] = defaultdict(int)
    models: set[str] = set()
    edges: set[tuple[str, str]] = set()
    decisive_dyads: list[tuple[str, str]] = []  # (winner, loser) per verdict
    for d in dyads:
        models.update(d.pair)
        for rater in d.choices:
            chosen = d.chosen_model(rater)
            if chosen is None:
                continue
            loser = d.pair[1] if chosen == d.pair[0] else d.pair[0]
            wins[(chosen, loser)] += 1
            edges.add((chosen, loser))
            decisive_dyads.append((chosen, loser))
    model_list = sorted(models)
    if len(model_list) < 2:
        raise DisconnectedGraph("need at least two models")
    if not _connected(model_list, edges):
        raise DisconnectedGraph("comparison graph is not connected")

    strengths = _bt_strengths(wins, model_list)

    rank_samples: dict[str, list[int]] = {m: [] for m in model_list}
    rngs = spawn_rngs(seed, bootstrap)
    for rng in rngs:
        idx = rng.integers(0, len(decisive_dyads), size=len(decisive_dyads))
        sample_wins: dict[tuple[str, str], int] = defaultdict(int)
        sample_edges: set[tuple[str, str]] = set()
        for i in idx:
            winner, loser = decisive_dyads[i]
            sample_wins[(winner, loser)] += 1
            sample_edges.add((winner, loser))
        if not _connected(model_list, sample_edges):
            continue
        s = _bt_strengths(sample_wins, model_list, tol=1e-6)
        ordering = sorted(model_list, key=lambda m: -s[m])
        for rank, m in enumerate(ordering, start=1):
            rank_samples[m].append(rank)

    rank_intervals = {}
    for m in model_list:
        samples = sorted(rank_samples[m]) or [
            sorted(model_list, key=lambda x: -strengths[x]).index(m) + 1
        ]
        rank_intervals[m] = [
            nearest_rank([float(r) for r in samples], 0.025),
            nearest_rank([float(r) for r in samples], 0.975),
        ]
    return {"strengths": strengths, "rank_intervals": rank_intervals, "n_verdicts": len(decisive_dyads)}
