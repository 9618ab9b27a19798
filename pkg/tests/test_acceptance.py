"""Acceptance suite: one test per acceptance criterion, at stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one PASS line per
criterion.
"""

from __future__ import annotations

import json
import math
import pathlib
import time
from fractions import Fraction

import numpy as np
import pytest

from wardbench.cli import run
from wardbench.cohort import brute_force_min_cover, greedy_set_cover, replay_cover, tokenize_admission
from wardbench.merge import (
    MergeConfig,
    TensorArchive,
    apply_merge,
    breadcrumbs_filter,
    dare_filter,
    della_filter,
    merge,
    round_half_up,
    task_vector,
)
from wardbench.oracle.prompts import fallback_rubric
from wardbench.oracle.types import Rubric, VerdictVector
from wardbench.reward import (
    Family,
    compute_rubric_score,
    format_reward,
    parse_completion,
    repetition_penalty,
    steps_reward,
    tag_reward,
)
from wardbench.splitter import build_split_item, sample_split
from wardbench.stats import (
    Z95,
    cohen_kappa,
    exact_binomial_p,
    fleiss_kappa,
    krippendorff_alpha,
    wilson_interval,
)
from wardbench.stats.report import analyze_export

from conftest import make_admission, make_admission_doc
from fixture_exports import build_export_rows
from test_stats_reliability import oracle_cohen, oracle_fleiss, oracle_krippendorff

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def report_pass(name: str) -> None:
    print(f"\nACCEPTANCE PASS: {name}")


def test_golden_score():
    """Golden rubric fixture scores 0.9032 +/- 1e-4 in under a millisecond."""
    doc = json.loads((FIXTURES / "golden_rubric.json").read_text())
    rubric = Rubric.from_json(doc["rubric"])
    verdicts = VerdictVector(verdicts=doc["verdicts"])

    score = compute_rubric_score(rubric, verdicts)
    assert abs(score - 0.9032) <= 1e-4
    assert score == pytest.approx(56 / 62, abs=1e-12)

    compute_rubric_score(rubric, verdicts)  # warm
    best = min(
        _timed(lambda: compute_rubric_score(rubric, verdicts)) for _ in range(5)
    )
    assert best < 1e-3, f"runtime {best * 1e3:.3f} ms exceeds 1 ms"
    report_pass(f"golden score {score:.4f} in {best * 1e6:.0f} us")


def _timed(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def test_fallback_rubric_arithmetic():
    """All-true verdicts yield exactly 33/39; positives-only yields 1.0."""
    rubric = fallback_rubric()
    all_true = VerdictVector(verdicts={c.id: True for c in rubric.criteria})
    assert compute_rubric_score(rubric, all_true) == 33 / 39
    positives = VerdictVector(verdicts={c.id: c.points > 0 for c in rubric.criteria})
    assert compute_rubric_score(rubric, positives) == 1.0
    report_pass("fallback rubric arithmetic 33/39 and 1.0")


# 20 canned completions; expected (format, tag, steps, repetition) derived by hand
REWARD_FIXTURES = [
    # think-then-text family
    ("<think>r</think>\nFinal answer.", Family.THINK_THEN_TEXT, (1.0, 1.0, 0.0, 0.0)),
    ("<think>a</think>", Family.THINK_THEN_TEXT, (0.0, 0.8, 0.0, 0.0)),
    ("no tags at all", Family.THINK_THEN_TEXT, (0.0, 0.0, 0.0, 0.0)),
    ("<think>Step 1: a Step 2: b</think>done", Family.THINK_THEN_TEXT, (1.0, 1.0, 2 / 3, 0.0)),
    ("<think>x</think><think>y</think>body", Family.THINK_THEN_TEXT, (0.0, 0.0, 0.0, 0.0)),
    ("  <think> padded </think>  final text", Family.THINK_THEN_TEXT, (1.0, 1.0, 0.0, 0.0)),
    ("<think>- a\n- b\n- c\n- d</think>plan", Family.THINK_THEN_TEXT, (1.0, 1.0, 1.0, 0.0)),
    ("a b c a b c a b c", Family.THINK_THEN_TEXT, (0.0, 0.0, 0.0, -4 / 7)),
    (
        "<think>First we check, then we act, finally we document</think>summary",
        Family.THINK_THEN_TEXT,
        (1.0, 1.0, 1.0, 0.0),
    ),
    ("<think>r</think><think>more</think>", Family.THINK_THEN_TEXT, (0.0, 0.0, 0.0, 0.0)),
    # answer-wrapper family
    ("<think>x</think><answer>y</answer>", Family.ANSWER_WRAPPER, (1.0, 1.0, 0.0, 0.0)),
    ("<think>x</think>", Family.ANSWER_WRAPPER, (0.0, 0.5, 0.0, 0.0)),
    ("<think>x</think>extra<answer>y</answer>", Family.ANSWER_WRAPPER, (1.0, 1.0, 0.0, 0.0)),
    ("<answer>y</answer><think>x</think>", Family.ANSWER_WRAPPER, (0.0, 1.0, 0.0, 0.0)),
    ("<think><think>a</think><answer>b</answer>", Family.ANSWER_WRAPPER, (1.0, 0.75, 0.0, 0.0)),
    ("text before <think>x</think><answer>y</answer>", Family.ANSWER_WRAPPER, (0.0, 1.0, 0.0, 0.0)),
    ("<think>x</think><answer>y</answer>trailing", Family.ANSWER_WRAPPER, (0.0, 1.0, 0.0, 0.0)),
    ("<think>x</think><answer>y</answer>\n", Family.ANSWER_WRAPPER, (1.0, 1.0, 0.0, 0.0)),
    ("<think>Step 1. a</think><answer>done</answer>", Family.ANSWER_WRAPPER, (1.0, 1.0, 1 / 3, 0.0)),
    ("", Family.ANSWER_WRAPPER, (0.0, 0.0, 0.0, 0.0)),
]


def test_reward_stack_regressions():
    """20 canned completions reproduce hand-derived component tuples exactly."""
    assert len(REWARD_FIXTURES) == 20
    for completion, family, expected in REWARD_FIXTURES:
        parse = parse_completion(completion, family)
        got = (
            format_reward(completion, family),
            tag_reward(completion, family),
            steps_reward(parse.think or ""),
            repetition_penalty(completion),
        )
        for g, e in zip(got, expected):
            assert g == pytest.approx(e, abs=1e-12), (completion, family, got, expected)
    assert repetition_penalty("a b c a b c a b c") == pytest.approx(-4 / 7, abs=1e-15)
    report_pass("reward stack regressions (20 fixtures, repetition -4/7)")


def test_splitter_law():
    """Sampling law, clamping, n=2 degenerate case, and ICD-free pasts."""
    adm = make_admission(n_events=100)
    ks = np.array([sample_split(adm, seed).k for seed in range(10_000)], dtype=float)
    assert abs(ks.mean() - 50.0) <= 0.5, f"mean k {ks.mean():.3f}"
    assert np.all((ks >= 1) & (ks <= 99))

    two = make_admission(n_events=2)
    assert all(sample_split(two, seed).k == 1 for seed in range(500))

    corpus = [
        make_admission(
            subject_id=i,
            hadm_id=i * 10,
            n_events=6 + i % 7,
            icd_event_indices=[i % 5, (i * 3) % 6],
        )
        for i in range(1, 51)
    ]
    for adm in corpus:
        item = None
        from wardbench.splitter import generate_split_item

        item = generate_split_item(adm, seed=42)
        if item is None:
            continue
        assert all("ICD" not in e.source for e in item.past)
    report_pass(f"splitter law: mean k {ks.mean():.3f}, clamp 100%, ICD-free pasts (50 admissions)")


def test_set_cover_oracle():
    """Greedy covers, replays the argmax, and meets the ln|U|+1 ratio bound."""
    rng = np.random.default_rng(2024)
    corpora = []
    # exhaustive: all corpora of 1..3 admissions over subsets of a 3-code alphabet
    import itertools

    alphabet = ["a", "b", "c"]
    subsets = [s for r in range(1, 4) for s in itertools.combinations(alphabet, r)]
    for size in (1, 2, 3):
        for combo in itertools.product(range(len(subsets)), repeat=size):
            corpora.append([list(subsets[i]) for i in combo])
    # sampled: 150 random corpora of up to 8 admissions over 7 codes
    for _ in range(150):
        n = int(rng.integers(1, 9))
        corpora.append(
            [
                sorted(set(rng.choice(list("abcdefg"), size=rng.integers(1, 5))))
                for _ in range(n)
            ]
        )

    for token_lists in corpora:
        corpus = [
            make_admission(subject_id=i + 1, hadm_id=i + 1, gender="F", age=40,
                           icd_codes=[(c, "10") for c in codes])
            for i, codes in enumerate(token_lists)
        ]
        token_sets = {t.key: tokenize_admission(t) for t in corpus}
        universe = set().union(*token_sets.values())
        train = greedy_set_cover(corpus)
        covered = set().union(*(token_sets[k] for k in train)) if train else set()
        assert covered == universe

        remaining = set(universe)
        for key, gain in replay_cover(corpus):
            best = max(len(ts & remaining) for ts in token_sets.values())
            assert gain == best
            remaining -= token_sets[key]

        optimum = brute_force_min_cover(corpus)
        assert len(train) <= (math.log(len(universe)) + 1) * len(optimum)
    report_pass(f"set cover oracle on {len(corpora)} corpora (exhaustive small + sampled <= 8)")


def test_merge_properties():
    """Filter count laws, DARE unbiasedness, zero-delta bit-exactness, runtime."""
    rng = np.random.default_rng(77)

    # DELLA per-row retained counts on 1,000 random rows
    checked_rows = 0
    while checked_rows < 1000:
        cols = int(rng.integers(2, 64))
        n_rows = int(rng.integers(1, 8))
        rows = rng.normal(size=(n_rows, cols))
        rho = float(rng.uniform(0.02, 0.999))
        out = della_filter(TensorArchive.from_arrays({"w": rows}), rho).entries["w"]
        expected = max(1, round_half_up(rho * cols))
        for r in range(n_rows):
            assert np.count_nonzero(out[r]) == expected
            checked_rows += 1

    # Breadcrumbs retains ceil(rho N) +/- 1 under nearest-rank quantiles
    for _ in range(200):
        n = int(rng.integers(10, 400))
        data = rng.normal(size=n)
        rho = float(rng.uniform(0.05, 0.6))
        gamma = float(rng.uniform(0.0, 0.3))
        out = breadcrumbs_filter(TensorArchive.from_arrays({"w": data}), rho, gamma)
        kept = int(np.count_nonzero(out.entries["w"]))
        assert abs(kept - math.ceil(rho * n)) <= 1

    # DARE Monte-Carlo mean within 4 sigma of delta over 10,000 seeds
    delta = TensorArchive.from_arrays({"w": np.array([2.0])})
    outs = np.array([dare_filter(delta, 0.5, seed=s).entries["w"][0] for s in range(10_000)])
    sigma_mean = 2.0 / math.sqrt(10_000)  # sd of one sample is 2.0 at rho=0.5
    assert abs(outs.mean() - 2.0) <= 4 * sigma_mean

    # zero-delta merge reproduces base bit-exactly for every method
    base_data = rng.normal(size=(64, 64)).astype(np.float32)
    base = TensorArchive.from_arrays({"w": base_data})
    for method in ("della", "breadcrumbs", "dare"):
        merged = apply_merge(base, TensorArchive.from_arrays({"w": base_data.copy()}),
                             MergeConfig(method=method))
        assert merged.entries["w"].tobytes() == base_data.tobytes()

    # runtime on a 100 MB archive
    big = {f"layer{i}.weight": rng.normal(size=(2048, 2048)).astype(np.float32) for i in range(6)}
    base_big = TensorArchive.from_arrays(big)
    tuned_big = TensorArchive.from_arrays(
        {k: v + rng.normal(scale=0.01, size=v.shape).astype(np.float32) for k, v in big.items()}
    )
    nbytes = sum(v.nbytes for v in big.values())
    assert nbytes >= 100_000_000  # 100 MB
    t0 = time.perf_counter()
    delta_big = task_vector(base_big, tuned_big)
    della_filter(delta_big, 0.15)
    breadcrumbs_filter(delta_big, 0.15, 0.02)
    filtered = dare_filter(delta_big, 0.5, seed=42)
    merge(base_big, filtered, 1.0)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"merge pipeline took {elapsed:.2f}s on {nbytes / 2**20:.0f} MB"
    report_pass(f"merge properties (1000 rows, 200 bands, 10k seeds, {elapsed:.1f}s on 100 MB)")


def test_statistics_oracles():
    """Reliability coefficients vs textbook oracles; exact interval and test values."""
    rng = np.random.default_rng(555)
    for _ in range(500):
        n = int(rng.integers(2, 25))
        v1 = [bool(b) for b in rng.integers(0, 2, size=n)]
        v2 = [bool(b) for b in rng.integers(0, 2, size=n)]
        expected = oracle_cohen(v1, v2)
        got = cohen_kappa(v1, v2)
        if expected is None:
            assert got.degenerate
        else:
            assert abs(got.value - expected) <= 1e-12

        raters = int(rng.integers(2, 6))
        matrix = [[bool(b) for b in rng.integers(0, 2, size=raters)] for _ in range(max(2, n // 2))]
        expected_f = oracle_fleiss(matrix)
        got_f = fleiss_kappa(matrix)
        if expected_f is None:
            assert got_f.degenerate
        else:
            assert abs(got_f.value - expected_f) <= 1e-12

        values = [
            [None if rng.random() < 0.15 else bool(rng.integers(0, 2)) for _ in range(raters)]
            for _ in range(max(2, n // 2))
        ]
        if sum(1 for row in values if sum(v is not None for v in row) >= 2) == 0:
            continue
        expected_k = oracle_krippendorff(values)
        from wardbench.stats.types import InsufficientPairs

        try:
            got_k = krippendorff_alpha(values)
        except InsufficientPairs:
            continue
        if expected_k is None:
            assert got_k.degenerate
        else:
            assert abs(got_k.value - expected_k) <= 1e-12

    low, _ = wilson_interval(24, 24)
    assert abs(low - 1.0 / (1.0 + Z95**2 / 24)) <= 1e-9

    assert exact_binomial_p(10, 10, 0.5) == Fraction(1, 512)  # 2^-9 exactly

    artifact = analyze_export(build_export_rows(), bootstrap_resamples=50, seed=42)
    spine = artifact["phase1"]["spine"]
    obesity = artifact["phase1"]["obesity"]
    pooled = artifact["phase1"]["pooled"]
    assert round(spine["rubric_quality"]["relevance_rate"] * 100, 1) == 83.1
    assert round(obesity["rubric_quality"]["relevance_rate"] * 100, 1) == 94.0
    assert round(spine["rubric_quality"]["modification_rate"] * 100, 1) == 3.4
    assert round(spine["rubric_quality"]["addition_rate"] * 100, 1) == 2.7
    assert round(spine["irr"]["cohen_kappa"]["value"], 3) == 0.749
    assert round(obesity["irr"]["cohen_kappa"]["value"], 3) == 0.658
    assert round(pooled["judge_alignment"]["accuracy"] * 100, 1) == 76.7
    assert round(pooled["judge_alignment"]["kappa"]["value"], 3) == 0.419
    assert round(pooled["score_alignment"]["mae"], 3) == 0.160
    report_pass("statistics oracles (500 matrices at 1e-12; Wilson; 2^-9; synthetic export cells)")


def test_pipeline_smoke(tmp_path):
    """Full mock-oracle pipeline in under 30 s with bit-identical re-aggregation."""
    docs = [
        make_admission_doc(subject_id=1, hadm_id=10, n_events=6, gender="F", age=74,
                           icd_codes=[("I10", "10"), ("E11", "10")]),
        make_admission_doc(subject_id=2, hadm_id=20, n_events=8, gender="M", age=55,
                           icd_codes=[("J18", "10")], icd_event_indices=[1]),
        make_admission_doc(subject_id=3, hadm_id=30, n_events=5, gender="F", age=81,
                           icd_codes=[("M48", "9")]),
    ]
    src = tmp_path / "raw.jsonl"
    src.write_text("\n".join(json.dumps(d) for d in docs))
    p = lambda name: str(tmp_path / name)

    t0 = time.perf_counter()
    assert run(["ingest", str(src), "--out", p("corpus.jsonl")]) == 0
    assert run(["cohort", "--corpus", p("corpus.jsonl"), "--out", p("manifest.json")]) == 0
    assert run(["split", "--corpus", p("corpus.jsonl"), "--manifest", p("manifest.json"),
                "--out", p("items.jsonl")]) == 0
    assert run(["generate", "--items", p("items.jsonl"), "--out", p("datums.jsonl")]) == 0
    assert run(["grade", "--datums", p("datums.jsonl"), "--out", p("graded.jsonl")]) == 0
    graded = [json.loads(l) for l in open(p("graded.jsonl"))]
    reward_rows = [
        {"completion": g["candidate"], "rubric": g["rubric"], "verdicts": g["verdicts"],
         "profile": "canonical", "family": "think-then-text"}
        for g in graded
    ]
    (tmp_path / "reward_in.jsonl").write_text("\n".join(json.dumps(r) for r in reward_rows))
    assert run(["reward", "--in", p("reward_in.jsonl"), "--out", p("rewards.jsonl")]) == 0
    assert run(["report", "--records", p("graded.jsonl"), "--out", p("report.json")]) == 0
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"pipeline took {elapsed:.1f}s"

    report = json.loads((tmp_path / "report.json").read_text())["report"]
    assert report["n_records"] == len(graded) > 0

    assert run(["report", "--records", p("graded.jsonl"), "--out", p("report2.json")]) == 0
    assert (tmp_path / "report.json").read_bytes() == (tmp_path / "report2.json").read_bytes()
    report_pass(f"pipeline smoke in {elapsed:.1f}s, re-aggregation bit-identical")


def test_headline_scores_out_of_scope():
    """Published leaderboard percentages need withheld weights and credentialed
    EHR data; this rig ships neither, so acceptance rests on the property and
    oracle suites above rather than on reproducing those numbers."""
    repo = pathlib.Path(__file__).parent.parent
    weight_files = []
    for pattern in ("*.safetensors", "*.bin", "*.pt", "*.gguf"):
        weight_files += [p for p in repo.rglob(pattern)
                         if "node_modules" not in p.parts and ".git" not in p.parts]
    assert weight_files == [], f"unexpected weight artifacts: {weight_files}"

    from wardbench.config import PipelineConfig

    cfg = PipelineConfig()
    assert cfg.oracle.endpoint.startswith("mock://")
    assert cfg.model.endpoint.startswith("mock://")
    report_pass(
        "headline model scores are out of desk-scale scope; "
        "property/oracle suites are the acceptance basis"
    )
