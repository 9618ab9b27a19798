from __future__ import annotations

import math

import numpy as np
import pytest

from wardbench.stats import (
    Z95,
    ab_metrics,
    bootstrap_ci,
    bradley_terry,
    bucket_of,
    effort_diagnostics,
    length_bias,
    nearest_rank,
    position_bias,
)
from wardbench.stats.types import AbDyad, DisconnectedGraph, NoDecisive, NoDyads


def dyad(case_id, pair=("ours", "gpt5"), choices=None, left=None, lengths=(100, 50),
         times=None, redisplay=False, cohort="spine") -> AbDyad:
    display = {}
    if left is not None:
        right = pair[1] if left == pair[0] else pair[0]
        display = {
            "actualModelA": left,
            "actualModelB": right,
            "displayedAsA": "Model A",
            "displayedAsB": "Model B",
        }
    return AbDyad(
        case_id=case_id,
        pair=pair,
        choices=choices or {},
        display=display,
        lengths=lengths,
        decision_time_seconds=times or {},
        is_redisplay=redisplay,
        cohort=cohort,
    )


class TestBuckets:
    def test_strict(self):
        assert bucket_of(dyad("c", choices={"r1": "m1", "r2": "m1"})) == "strict"

    def test_semi(self):
        assert bucket_of(dyad("c", choices={"r1": "m1", "r2": "tie"})) == "semi"

    def test_single(self):
        assert bucket_of(dyad("c", choices={"r1": "m2"})) == "single"

    def test_non_consensus_disagreement(self):
        assert bucket_of(dyad("c", choices={"r1": "m1", "r2": "m2"})) == "non_consensus"

    def test_double_tie_is_non_consensus(self):
        assert bucket_of(dyad("c", choices={"r1": "tie", "r2": "tie"})) == "non_consensus"


def spine_gpt5_fixture() -> list[AbDyad]:
    """86 dyads: 24 strict (all for m1), 1 semi, 53 single, 8 non-consensus."""
    dyads = []
    for i in range(24):
        dyads.append(dyad(f"s{i}", choices={"r1": "m1", "r2": "m1"}))
    dyads.append(dyad("semi", choices={"r1": "m1", "r2": "tie"}))
    for i in range(53):
        dyads.append(dyad(f"single{i}", choices={"r1": "m1"}))
    for i in range(8):
        dyads.append(dyad(f"non{i}", choices={"r1": "m1", "r2": "m2"}))
    return dyads


class TestAbMetrics:
    def test_bucket_counts_and_total(self):
        report = ab_metrics(spine_gpt5_fixture(), "strict-consensus")
        row = report["ours vs gpt5"]
        assert row["bucket_counts"] == {"strict": 24, "semi": 1, "single": 53, "non_consensus": 8}
        assert sum(row["bucket_counts"].values()) == 86

    def test_strict_consensus_win_rate_and_wilson(self):
        row = ab_metrics(spine_gpt5_fixture(), "strict-consensus")["ours vs gpt5"]
        assert row["n_decisive"] == 24
        assert row["win_rate"] == 1.0
        # closed form for p_hat = 1: lower bound = 1 / (1 + z^2/n)
        assert row["wilson_ci"][0] == pytest.approx(1 / (1 + Z95**2 / 24), abs=1e-9)
        assert row["wilson_ci"][0] == pytest.approx(0.862, abs=5e-4)

    def test_all_ties(self):
        dyads = [dyad(f"c{i}", choices={"r1": "tie", "r2": "tie"}) for i in range(5)]
        row = ab_metrics(dyads, "all-decisive")["ours vs gpt5"]
        assert row["win_rate"] == 0.0 and row["tie_rate"] == 1.0
        assert row["degenerate"] is True

    def test_all_decisive_pools_both_raters(self):
        dyads = [dyad("a", choices={"r1": "m1", "r2": "m2"}),
                 dyad("b", choices={"r1": "m1", "r2": "m1"})]
        row = ab_metrics(dyads, "all-decisive")["ours vs gpt5"]
        assert row["n"] == 4 and row["wins_m1"] == 3 and row["wins_m2"] == 1

    def test_bonferroni_scales_with_arms(self):
        dyads = []
        for pair in (("ours", "a"), ("ours", "b"), ("ours", "c")):
            for i in range(6):
                dyads.append(dyad(f"{pair[1]}{i}", pair=pair, choices={"r1": "m1", "r2": "m1"}))
        report = ab_metrics(dyads, "strict-consensus")
        for row in report.values():
            assert row["binomial_p_bonferroni"] == pytest.approx(min(1.0, row["binomial_p"] * 3))

    def test_empty_raises(self):
        with pytest.raises(NoDyads):
            ab_metrics([], "all-decisive")

    def test_order_invariance(self):
        import random

        dyads = spine_gpt5_fixture()
        shuffled = dyads[:]
        random.Random(5).shuffle(shuffled)
        a = ab_metrics(dyads, "strict-consensus")["ours vs gpt5"]
        b = ab_metrics(shuffled, "strict-consensus")["ours vs gpt5"]
        assert a == b


class TestPositionBias:
    def pooled_fixture(self):
        """158 decisive verdicts, 83 prefer the left pane."""
        dyads = []
        for i in range(79):
            left_wins = i < 42  # rater r1: 42 of 79 left
            chosen_left = "ours" if left_wins else "gpt5"
            dyads.append(
                dyad(f"r1c{i}", choices={"r1": "m1" if left_wins else "m2"}, left="ours")
                if left_wins
                else dyad(f"r1c{i}", choices={"r1": "m1"}, left="gpt5")
            )
        for i in range(79):
            left_wins = i < 41  # rater r2: 41 of 79 left
            dyads.append(
                dyad(f"r2c{i}", choices={"r2": "m1" if left_wins else "m2"}, left="ours")
                if left_wins
                else dyad(f"r2c{i}", choices={"r2": "m1"}, left="gpt5")
            )
        return dyads

    def test_pooled_rate_and_p(self):
        result = position_bias(self.pooled_fixture())
        assert result.n == 158
        assert result.value == pytest.approx(83 / 158)
        assert round(result.value * 100, 1) == 52.5
        assert result.p_value == pytest.approx(0.5777, abs=5e-4)
        assert round(result.p_value, 2) == 0.58

    def test_half_split_p_one(self):
        dyads = []
        for i in range(10):
            left = "ours" if i % 2 == 0 else "gpt5"
            dyads.append(dyad(f"c{i}", choices={"r1": "m1"}, left=left))
        result = position_bias(dyads)
        assert result.p_value == pytest.approx(1.0)

    def test_ten_of_ten_left(self):
        dyads = [dyad(f"c{i}", choices={"r1": "m1"}, left="ours") for i in range(10)]
        result = position_bias(dyads)
        assert result.p_value == pytest.approx(2 * 0.5**10 * 512 / 512, abs=1e-12)
        assert result.p_value == pytest.approx(2.0 ** -9)

    def test_no_decisive_raises(self):
        with pytest.raises(NoDecisive):
            position_bias([dyad("c", choices={"r1": "tie"}, left="ours")])


class TestLengthBias:
    def test_overall_fixture(self):
        """158 decisive, 156 prefer the longer response -> 98.7%."""
        dyads = []
        for i in range(156):
            dyads.append(dyad(f"c{i}", choices={"r1": "m1"}, lengths=(200, 50)))
        for i in range(2):
            dyads.append(dyad(f"d{i}", choices={"r1": "m2"}, lengths=(200, 50)))
        result = length_bias(dyads)
        assert result.n == 158
        assert round(result.value * 100, 1) == 98.7

    def test_equal_lengths_excluded_and_degenerate(self):
        dyads = [dyad("c", choices={"r1": "m1"}, lengths=(80, 80))]
        result = length_bias(dyads)
        assert result.degenerate and result.n == 0

    def test_three_quarters(self):
        dyads = [dyad(f"c{i}", choices={"r1": "m1"}, lengths=(100, 10)) for i in range(3)]
        dyads.append(dyad("c3", choices={"r1": "m2"}, lengths=(100, 10)))
        assert length_bias(dyads).value == pytest.approx(0.75)


class TestEffort:
    def test_single_dyad_percentiles_collapse(self):
        d = dyad("c", choices={"r1": "m1"}, times={"r1": 13.2})
        eff = effort_diagnostics([d])["r1"]
        assert eff["median_s"] == eff["p75_s"] == eff["p90_s"] == 13.2

    def test_percentiles_match_sort_oracle(self):
        rng = np.random.default_rng(6)
        times = [float(t) for t in rng.uniform(5, 300, size=10)]
        dyads = [
            dyad(f"c{i}", choices={"r1": "m1"}, times={"r1": t}) for i, t in enumerate(times)
        ]
        eff = effort_diagnostics(dyads)["r1"]
        ordered = sorted(times)
        assert eff["median_s"] == ordered[math.ceil(0.5 * 10) - 1]
        assert eff["p75_s"] == ordered[math.ceil(0.75 * 10) - 1]
        assert eff["p90_s"] == ordered[math.ceil(0.90 * 10) - 1]

    def test_median_fixture_value(self):
        # 79 verdicts whose nearest-rank median lands on 13.2
        times = [13.2 + (i - 39) * 0.5 for i in range(79)]
        dyads = [
            dyad(f"c{i}", choices={"r1": "m1"}, times={"r1": t}) for i, t in enumerate(times)
        ]
        eff = effort_diagnostics(dyads)["r1"]
        assert eff["n"] == 79
        assert eff["median_s"] == pytest.approx(13.2)

    def test_revision_counted_on_redisplay(self):
        first = dyad("c", choices={"r1": "m1"}, times={"r1": 10.0})
        shown_again = dyad("c", choices={"r1": "m2"}, times={"r1": 4.0}, redisplay=True)
        eff = effort_diagnostics([first, shown_again])["r1"]
        assert eff["revisions"] == 1
        assert eff["n"] == 1  # redisplays do not inflate the verdict count

    def test_tie_rate(self):
        dyads = [dyad("a", choices={"r1": "tie"}), dyad("b", choices={"r1": "m1"})]
        assert effort_diagnostics(dyads)["r1"]["tie_rate"] == 0.5


class TestBradleyTerry:
    def test_symmetric_equal_strengths(self):
        dyads = [dyad("a", pair=("A", "B"), choices={"r1": "m1"}),
                 dyad("b", pair=("A", "B"), choices={"r1": "m2"})]
        result = bradley_terry(dyads, bootstrap=10)
        assert result["strengths"]["A"] == pytest.approx(0.5, abs=1e-6)

    def test_three_to_one_ratio(self):
        dyads = [dyad(f"w{i}", pair=("A", "B"), choices={"r1": "m1"}) for i in range(3)]
        dyads.append(dyad("l", pair=("A", "B"), choices={"r1": "m2"}))
        result = bradley_terry(dyads, bootstrap=0)
        # closed form for 2 models: strength ratio equals the win ratio
        ratio = result["strengths"]["A"] / result["strengths"]["B"]
        assert ratio == pytest.approx(3.0, rel=1e-6)

    def test_disconnected_graph(self):
        dyads = [dyad("a", pair=("A", "B"), choices={"r1": "m1"}),
                 dyad("b", pair=("C", "D"), choices={"r1": "m1"})]
        with pytest.raises(DisconnectedGraph):
            bradley_terry(dyads, bootstrap=0)

    def test_relabeling_invariance(self):
        def build(names):
            return [
                dyad("a", pair=(names[0], names[1]), choices={"r1": "m1", "r2": "m1"}),
                dyad("b", pair=(names[1], names[2]), choices={"r1": "m1"}),
                dyad("c", pair=(names[0], names[2]), choices={"r1": "m2"}),
            ]

        s1 = bradley_terry(build(["X", "Y", "Z"]), bootstrap=0)["strengths"]
        s2 = bradley_terry(build(["P", "Q", "R"]), bootstrap=0)["strengths"]
        assert s1["X"] == pytest.approx(s2["P"], rel=1e-6)
        assert s1["Y"] == pytest.approx(s2["Q"], rel=1e-6)

    def test_rank_intervals_present(self):
        dyads = [dyad(f"a{i}", pair=("A", "B"), choices={"r1": "m1"}) for i in range(8)]
        dyads += [dyad(f"b{i}", pair=("A", "B"), choices={"r1": "m2"}) for i in range(2)]
        result = bradley_terry(dyads, bootstrap=50, seed=1)
        assert result["rank_intervals"]["A"][0] >= 1


class TestBootstrap:
    def test_constant_series_degenerate_interval(self):
        low, high = bootstrap_ci([0.4] * 10, resamples=100, seed=1)
        assert low == high == pytest.approx(0.4)

    def test_seeded_reproducibility(self):
        values = list(np.random.default_rng(9).uniform(size=25))
        a = bootstrap_ci(values, resamples=200, seed=42)
        b = bootstrap_ci(values, resamples=200, seed=42)
        assert a == b

    def test_coverage_on_uniform_mean(self):
        """CI contains the true mean in >= 90% of 200 meta-trials."""
        rng = np.random.default_rng(1000)
        hits = 0
        for trial in range(200):
            sample = rng.uniform(0, 1, size=40)
            low, high = bootstrap_ci(list(sample), resamples=200, seed=trial)
            if low <= 0.5 <= high:
                hits += 1
        assert hits >= 180

    def test_interval_ordering(self):
        values = list(np.random.default_rng(2).normal(size=30))
        low, high = bootstrap_ci(values, resamples=300, seed=3)
        assert low <= high


class TestNearestRank:
    def test_simple(self):
        assert nearest_rank([1.0, 2.0, 3.0, 4.0], 0.5) == 2.0
        assert nearest_rank([1.0, 2.0, 3.0, 4.0], 0.75) == 3.0
        assert nearest_rank([5.0], 0.9) == 5.0
