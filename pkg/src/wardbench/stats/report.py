"""Analysis engine entry point: parse annotation exports, emit a markdown
report and a machine-readable JSON artifact.

Export rows are the annotation service's JSON-lines: ``clinical_reasoning``
rows carry curated criteria with per-rater/oracle verdicts;
``ab_clinical_reasoning`` rows carry three pairwise choices with display
mappings.  Invalid rows are parsed but excluded from quality metrics.
"""

from __future__ import annotations

import json
from collections import defaultdict
from typing import Any, Iterable

from ..oracle.types import Axis
from ..timeline import canonical_json
from .alignment import judge_alignment, pooled_verdict, rubric_quality, score_alignment
from .bootstrap import bootstrap_ci
from .preference import ab_metrics, bradley_terry, effort_diagnostics, length_bias, position_bias
from .reliability import cohen_kappa, fleiss_kappa, krippendorff_alpha
from .types import AbDyad, AnnotatedCriterion, DisconnectedGraph, EmptyInput, NoDecisive, RubricAnnotation, StatResult


def parse_export(rows: Iterable[dict[str, Any]]) -> tuple[list[RubricAnnotation], list[AbDyad]]:
    """Split export rows into rubric annotations (merged across raters) and dyads."""
    rubric_payloads: dict[str, list[dict[str, Any]]] = defaultdict(list)
    dyads: list[AbDyad] = []
    for row in rows:
        kind = row.get("submission_type")
        if kind == "clinical_reasoning":
            rubric_payloads[str(row["sample_id"])].append(row)
        elif kind == "ab_clinical_reasoning":
            dyads.extend(_dyads_from_row(row))
    annotations = [_merge_rubric_rows(sample, rows_) for sample, rows_ in sorted(rubric_payloads.items())]
    return annotations, dyads


def _merge_rubric_rows(sample_id: str, rows: list[dict[str, Any]]) -> RubricAnnotation:
    """Fold per-rater submissions for one case into a single annotation."""
    criteria: dict[str, AnnotatedCriterion] = {}
    cohort = ""
    is_invalid = False
    invalid_reason = None
    for row in rows:
        rater = str(row["rater_id"])
        cohort = row.get("cohort", cohort) or cohort
        if row.get("is_invalid"):
            is_invalid = True
            invalid_reason = row.get("invalid_reason") or invalid_reason
            continue
        for c in row["payload"]["criteria"]:
            cid = str(c["criterion_id"])
            not_relevant = bool(c.get("not_relevant", False)) or c.get("suitable") is False
            if cid not in criteria:
                criteria[cid] = AnnotatedCriterion(
                    criterion_id=cid,
                    axis=Axis(c["axis"]),
                    points=int(c.get("points", 1)),
                    order=int(c.get("order", 0)),
                    is_new=bool(c.get("is_new", False)),
                    is_modified=bool(c.get("is_modified", False)),
                    not_relevant=not_relevant,
                    oracle_verdict=c.get("oracle_verdict"),
                )
            crit = criteria[cid]
            crit.is_modified = crit.is_modified or bool(c.get("is_modified", False))
            crit.not_relevant = crit.not_relevant or not_relevant
            if crit.not_relevant:
                crit.verdicts.clear()
            elif "verdict" in c and c["verdict"] is not None:
                crit.verdicts[rater] = bool(c["verdict"])
            if c.get("rationale"):
                crit.rationales[rater] = str(c["rationale"])
    return RubricAnnotation(
        case_id=sample_id,
        cohort=cohort,
        criteria=sorted(criteria.values(), key=lambda c: (c.order, c.criterion_id)),
        is_invalid=is_invalid,
        invalid_reason=invalid_reason,
    )


def _dyads_from_row(row: dict[str, Any]) -> list[AbDyad]:
    out = []
    rater = str(row["rater_id"])
    for p in row["payload"]["pairs"]:
        if p.get("choice") is None:
            continue
        out.append(
            AbDyad(
                case_id=str(row["sample_id"]),
                pair=(str(p["model_1"]), str(p["model_2"])),
                choices={rater: str(p["choice"])},
                display=p.get("display", {}),
                lengths=tuple(p.get("lengths", (0, 0))),
                decision_time_seconds={rater: float(p["decision_time_seconds"])}
                if p.get("decision_time_seconds") is not None
                else {},
                is_invalid=bool(row.get("is_invalid", False)),
                invalid_reason=row.get("invalid_reason"),
                is_redisplay=bool(p.get("is_redisplay", False)),
                cohort=row.get("cohort", ""),
            )
        )
    return out


def merge_dyads(dyads: list[AbDyad]) -> list[AbDyad]:
    """Combine per-rater dyad rows that describe the same (case, pair) display."""
    merged: dict[tuple[str, tuple[str, str], bool], AbDyad] = {}
    for d in dyads:
        key = (d.case_id, d.pair, d.is_redisplay)
        if key not in merged:
            merged[key] = AbDyad(
                case_id=d.case_id,
                pair=d.pair,
                choices={},
                display=d.display,
                lengths=d.lengths,
                decision_time_seconds={},
                is_invalid=d.is_invalid,
                invalid_reason=d.invalid_reason,
                is_redisplay=d.is_redisplay,
                cohort=d.cohort,
            )
        target = merged[key]
        target.choices.update(d.choices)
        target.decision_time_seconds.update(d.decision_time_seconds)
        target.is_invalid = target.is_invalid or d.is_invalid
    return [merged[k] for k in sorted(merged, key=lambda k: (k[0], k[1], k[2]))]


def _criterion_verdict_vectors(annos: list[RubricAnnotation]) -> dict[str, Any]:
    """Aligned rater/oracle vectors over verdict-bearing criteria."""
    rater_pairs: dict[str, list[list[bool]]] = defaultdict(list)
    v_o: list[bool] = []
    v_c_r1: list[bool] = []
    v_c_r2: list[bool] = []
    axes: list[Axis] = []
    for anno in annos:
        if anno.is_invalid:
            continue
        for c in anno.retained():
            raters = sorted(c.verdicts)
            if len(raters) >= 2:
                rater_pairs[anno.cohort].append([c.verdicts[r] for r in raters[:2]])
            if c.oracle_verdict is not None and len(raters) >= 1:
                v_o.append(bool(c.oracle_verdict))
                votes = [c.verdicts[r] for r in raters]
                v_c_r1.append(votes[0])
                v_c_r2.append(votes[1] if len(votes) > 1 else votes[0])
                axes.append(c.axis)
    return {"rater_pairs": rater_pairs, "v_o": v_o, "v_c": [v_c_r1, v_c_r2], "axes": axes}


def case_scores(annos: list[RubricAnnotation]) -> tuple[list[float], list[float]]:
    """Per-case (oracle, clinician) scalar scores over the curated rubric."""
    oracle_scores: list[float] = []
    clinician_scores: list[float] = []
    for anno in annos:
        if anno.is_invalid:
            continue
        retained = [c for c in anno.retained() if c.verdicts]
        positive = sum(c.points for c in retained if c.points > 0)
        if positive <= 0:
            continue
        earned_c = sum(
            c.points for c in retained if pooled_verdict(list(c.verdicts.values()))
        )
        oracle_rows = [c for c in retained if c.oracle_verdict is not None]
        positive_o = sum(c.points for c in oracle_rows if c.points > 0)
        if positive_o <= 0:
            continue
        earned_o = sum(c.points for c in oracle_rows if c.oracle_verdict)
        clinician_scores.append(min(1.0, max(0.0, earned_c / positive)))
        oracle_scores.append(min(1.0, max(0.0, earned_o / positive_o)))
    return oracle_scores, clinician_scores


def analyze_export(rows: Iterable[dict[str, Any]], bootstrap_resamples: int = 1000,
                   seed: int = 42) -> dict[str, Any]:
    """Full analysis artifact over one export; cohorts reported separately and pooled."""
    annotations, raw_dyads = parse_export(rows)
    dyads = merge_dyads(raw_dyads)
    artifact: dict[str, Any] = {"phase1": {}, "phase2": {}, "n_annotations": len(annotations),
                                "n_dyads": len(dyads), "seed": seed}

    cohorts = sorted({a.cohort for a in annotations} | {d.cohort for d in dyads} - {""})

    def phase1_block(annos: list[RubricAnnotation]) -> dict[str, Any] | None:
        live = [a for a in annos if not a.is_invalid]
        if not annos:
            return None
        block: dict[str, Any] = {}
        try:
            block["rubric_quality"] = rubric_quality(annos)
        except EmptyInput:
            return None
        vectors = _criterion_verdict_vectors(live)
        pairs = [p for ps in vectors["rater_pairs"].values() for p in ps]
        if pairs:
            v1 = [p[0] for p in pairs]
            v2 = [p[1] for p in pairs]
            block["irr"] = {
                "percent_agreement": sum(1 for a, b in zip(v1, v2) if a == b) / len(v1),
                "cohen_kappa": cohen_kappa(v1, v2).to_json(),
                "fleiss_kappa": fleiss_kappa([list(p) for p in pairs]).to_json(),
                "krippendorff_alpha": krippendorff_alpha([list(p) for p in pairs]).to_json(),
                "n_pairs": len(pairs),
            }
        if vectors["v_o"]:
            ja = judge_alignment(vectors["v_o"], vectors["v_c"], vectors["axes"])
            ja["kappa"] = ja["kappa"].to_json()
            block["judge_alignment"] = ja
        o_scores, c_scores = case_scores(live)
        if o_scores:
            sa = score_alignment(o_scores, c_scores)
            sa["pearson"] = sa["pearson"].to_json()
            sa["spearman"] = sa["spearman"].to_json()
            sa["mae_ci"] = list(
                bootstrap_ci(
                    [abs(a - b) for a, b in zip(o_scores, c_scores)],
                    resamples=bootstrap_resamples,
                    seed=seed,
                )
            )
            block["score_alignment"] = sa
        return block

    pooled = phase1_block(annotations)
    if pooled:
        artifact["phase1"]["pooled"] = pooled
    for cohort in cohorts:
        block = phase1_block([a for a in annotations if a.cohort == cohort])
        if block:
            artifact["phase1"][cohort] = block

    live_dyads = [d for d in dyads if not d.is_invalid]
    if live_dyads:
        phase2: dict[str, Any] = {
            "ab_all_decisive": ab_metrics(live_dyads, "all-decisive"),
            "ab_strict_consensus": ab_metrics(live_dyads, "strict-consensus"),
            "effort": effort_diagnostics(live_dyads),
        }
        try:
            phase2["position_bias"] = position_bias(live_dyads).to_json()
        except NoDecisive:
            phase2["position_bias"] = None
        lb = length_bias(live_dyads)
        phase2["length_bias"] = lb.to_json()
        try:
            phase2["bradley_terry"] = bradley_terry(live_dyads, seed=seed)
        except DisconnectedGraph as exc:
            phase2["bradley_terry"] = {"error": str(exc)}
        artifact["phase2"]["pooled"] = phase2
        for cohort in cohorts:
            subset = [d for d in live_dyads if d.cohort == cohort]
            if subset:
                artifact["phase2"][cohort] = {
                    "ab_all_decisive": ab_metrics(subset, "all-decisive"),
                    "ab_strict_consensus": ab_metrics(subset, "strict-consensus"),
                }
    return artifact


def _fmt_pct(x: float | None) -> str:
    return "n/a" if x is None else f"{x * 100:.1f}%"


def _fmt3(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.3f}"


def render_markdown(artifact: dict[str, Any]) -> str:
    lines = ["# Annotation analysis report", ""]
    for cohort, block in artifact.get("phase1", {}).items():
        lines.append(f"## Phase 1 ({cohort})")
        rq = block.get("rubric_quality", {})
        lines.append(f"- cases: {rq.get('n_cases')} / oracle criteria: {rq.get('n_oracle_criteria')}")
        lines.append(f"- validity rate: {_fmt_pct(rq.get('validity_rate'))}")
        lines.append(f"- criterion relevance rate: {_fmt_pct(rq.get('relevance_rate'))}")
        lines.append(f"- modification rate: {_fmt_pct(rq.get('modification_rate'))}")
        lines.append(f"- addition rate: {_fmt_pct(rq.get('addition_rate'))}")
        irr = block.get("irr")
        if irr:
            lines.append(
                f"- inter-rater: PA {_fmt_pct(irr['percent_agreement'])}, "
                f"Cohen kappa {_fmt3(irr['cohen_kappa']['value'])}, "
                f"Fleiss kappa {_fmt3(irr['fleiss_kappa']['value'])}, "
                f"Krippendorff alpha {_fmt3(irr['krippendorff_alpha']['value'])}"
            )
        ja = block.get("judge_alignment")
        if ja:
            lines.append(
                f"- judge alignment: accuracy {_fmt_pct(ja['accuracy'])}, "
                f"balanced F1 {_fmt3(ja['balanced_f1'])}, kappa {_fmt3(ja['kappa']['value'])}"
            )
        sa = block.get("score_alignment")
        if sa:
            lines.append(
                f"- score alignment: MAE {_fmt3(sa['mae'])}, "
                f"Pearson r {_fmt3(sa['pearson']['value'])}, "
                f"Spearman rho {_fmt3(sa['spearman']['value'])}"
            )
        lines.append("")
    for cohort, block in artifact.get("phase2", {}).items():
        lines.append(f"## Phase 2 ({cohort})")
        for mode_key, label in (("ab_strict_consensus", "strict consensus"), ("ab_all_decisive", "all decisive")):
            for pair, row in block.get(mode_key, {}).items():
                ci = row.get("wilson_ci") or [None, None]
                lines.append(
                    f"- [{label}] {pair}: win {_fmt_pct(row['win_rate'])} "
                    f"(n={row['n']}, decisive {_fmt_pct(row.get('decisive_win_rate'))}, "
                    f"Wilson [{_fmt3(ci[0])}, {_fmt3(ci[1])}], "
                    f"buckets {row['bucket_counts']})"
                )
        pb = block.get("position_bias")
        if pb:
            lines.append(
                f"- position bias: left {_fmt_pct(pb['value'])} of {pb['n']} decisive, p={_fmt3(pb['p_value'])}"
            )
        lb = block.get("length_bias")
        if lb and not lb.get("degenerate"):
            lines.append(f"- length bias: longer preferred {_fmt_pct(lb['value'])} of {lb['n']}")
        bt = block.get("bradley_terry")
        if bt and "strengths" in bt:
            ordered = sorted(bt["strengths"].items(), key=lambda kv: -kv[1])
            lines.append("- Bradley-Terry strengths: " + ", ".join(f"{m} {_fmt3(s)}" for m, s in ordered))
        eff = block.get("effort")
        if eff:
            for rater, row in sorted(eff.items()):
                lines.append(
                    f"- effort {rater}: n={row['n']}, tie {_fmt_pct(row['tie_rate'])}, "
                    f"median {row['median_s']}s, p75 {row['p75_s']}s, p90 {row['p90_s']}s, "
                    f"revisions {row['revisions']}"
                )
        lines.append("")
    return "\n".join(lines)


def run_analysis(export_path: str, out_json: str, out_markdown: str,
                 bootstrap_resamples: int = 1000, seed: int = 42) -> dict[str, Any]:
    rows = []
    with open(export_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    artifact = analyze_export(rows, bootstrap_resamples=bootstrap_resamples, seed=seed)
    with open(out_json, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(artifact) + "\n")
    with open(out_markdown, "w", encoding="utf-8") as fh:
        fh.write(render_markdown(artifact))
    return artifact
