"""Single CLI entry point wiring all pipeline stages.

Exit codes: 0 ok, 1 stage failure, 2 usage.  Every stage writes a
self-contained artifact (with the resolved config stamped in) so downstream
stages re-run against frozen upstream files.
"""

from __future__ import annotations

import json
import logging
import sys
from typing import Any

import click

from . import __version__
from .config import ConfigError, PipelineConfig, load_config
from .timeline import TokenBudget, canonical_json, iter_admissions

log = logging.getLogger("wardbench")


def _write_jsonl(path: str, rows: list[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(canonical_json(row) + "\n")


def _read_jsonl(path: str) -> list[dict[str, Any]]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _stamp(path: str, cfg: PipelineConfig, extra: dict[str, Any] | None = None) -> None:
    doc = {"config": cfg.resolved(), "version": __version__}
    doc.update(extra or {})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc) + "\n")


pass_config = click.make_pass_decorator(PipelineConfig)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Pipeline config JSON; env vars override secrets.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.version_option(__version__)
@click.pass_context
def main(ctx: click.Context, config_path: str | None, seed: int | None) -> None:
    """Clinical-reasoning dataset, scoring, merging, and annotation workbench."""
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    if seed is not None:
        cfg.seed = seed
    ctx.obj = cfg


@main.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output JSON-lines corpus.")
@pass_config
def ingest(cfg: PipelineConfig, inputs: tuple[str, ...], out: str) -> None:
    """Normalize admission files into an ascending-timeline corpus."""
    rows = []
    for path in inputs:
        for admission in iter_admissions(path):
            rows.append(admission.to_json())
    _write_jsonl(out, rows)
    _stamp(out + ".meta.json", cfg, {"n_admissions": len(rows), "inputs": list(inputs)})
    click.echo(f"ingested {len(rows)} admissions -> {out}", err=True)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Train/test manifest JSON.")
@pass_config
def cohort(cfg: PipelineConfig, corpus: str, out: str) -> None:
    """Greedy set-cover train selection plus seeded 20% test sample."""
    from .cohort import greedy_set_cover, sample_test_split
    from .timeline import admission_from_dict

    admissions = [admission_from_dict(r) for r in _read_jsonl(corpus)]
    train = greedy_set_cover(admissions)
    split = sample_test_split(admissions, train, seed=cfg.seed)
    doc = {
        "train": sorted([list(k) for k in split.train]),
        "test": sorted([list(k) for k in split.test]),
        "seed": split.seed,
        "config": cfg.resolved(),
    }
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc) + "\n")
    click.echo(f"cohort: train={len(split.train)} test={len(split.test)} -> {out}", err=True)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--which", type=click.Choice(["train", "test"]), default="train")
@click.option("--out", required=True, type=click.Path(), help="Split items JSON-lines.")
@pass_config
def split(cfg: PipelineConfig, corpus: str, manifest: str, which: str, out: str) -> None:
    """Sample past/future splits with outcome-constraint filtering."""
    from .splitter import CorpusRegistry, check_outcome_constraints, generate_split_item, split_item_to_json
    from .timeline import admission_from_dict

    admissions = [admission_from_dict(r) for r in _read_jsonl(corpus)]
    with open(manifest, "r", encoding="utf-8") as fh:
        wanted = {tuple(k) for k in json.load(fh)[which]}
    registry = CorpusRegistry.from_corpus(admissions)
    rows = []
    skipped: dict[str, int] = {}
    for admission in admissions:
        if admission.key not in wanted:
            continue
        ok, reason = check_outcome_constraints(admission, registry)
        if not ok:
            skipped[reason] = skipped.get(reason, 0) + 1
            continue
        for i in range(cfg.splits_per_admission):
            item = generate_split_item(admission, seed=cfg.seed + i)
            if item is None:
                skipped["empty-past"] = skipped.get("empty-past", 0) + 1
                continue
            rows.append(split_item_to_json(item))
    _write_jsonl(out, rows)
    _stamp(out + ".meta.json", cfg, {"n_items": len(rows), "skipped": skipped, "which": which})
    click.echo(f"split: {len(rows)} items (skipped {skipped}) -> {out}", err=True)


@main.command()
@click.option("--items", "items_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Datums JSON-lines (QA + rubric).")
@click.option("--categories", default=None, help="Comma-separated subset of action spaces.")
@pass_config
def generate(cfg: PipelineConfig, items_path: str, out: str, categories: str | None) -> None:
    """Stage-1 query/reference and stage-2 rubric generation via the oracle."""
    from .actionspaces import ActionSpace, Category
    from .datum import PomdpDatum
    from .oracle import OracleGateway, SchemaViolation, backend_for
    from .splitter import split_item_from_json

    gateway = OracleGateway(backend_for(cfg.oracle.endpoint, cfg.oracle.api_key, cfg.oracle.timeout), cfg.oracle)
    wanted = (
        [Category(c.strip()) for c in categories.split(",")]
        if categories
        else list(Category)
    )
    rows = []
    failures = 0
    for doc in _read_jsonl(items_path):
        item = split_item_from_json(doc)
        for cat in wanted:
            space = ActionSpace(cat)
            try:
                qa = gateway.generate_qa(item, space)
                try:
                    rubric = gateway.generate_rubric(item, qa)
                except SchemaViolation:
                    rubric = gateway.fallback_rubric()
                rows.append(PomdpDatum(item=item, category=cat, qa=qa, rubric=rubric).to_json())
            except Exception as exc:
                failures += 1
                log.warning("generate failed for %s/%s: %s", item.key, cat.value, exc)
    _write_jsonl(out, rows)
    _stamp(out + ".meta.json", cfg, {"n_datums": len(rows), "failures": failures})
    click.echo(f"generate: {len(rows)} datums ({failures} failures) -> {out}", err=True)


@main.command()
@click.option("--datums", "datums_path", required=True, type=click.Path(exists=True))
@click.option("--candidates", "candidates_path", type=click.Path(exists=True), default=None,
              help="JSON-lines of {datum_id, candidate}; defaults to grading the references.")
@click.option("--out", required=True, type=click.Path(), help="Graded records JSON-lines.")
@pass_config
def grade(cfg: PipelineConfig, datums_path: str, candidates_path: str | None, out: str) -> None:
    """Grade candidate answers against each datum's rubric."""
    from .datum import PomdpDatum
    from .evalharness import grade_datum
    from .oracle import OracleGateway, backend_for

    gateway = OracleGateway(backend_for(cfg.oracle.endpoint, cfg.oracle.api_key, cfg.oracle.timeout), cfg.oracle)
    candidates: dict[str, str] = {}
    if candidates_path:
        for row in _read_jsonl(candidates_path):
            candidates[row["datum_id"]] = row["candidate"]
    rows = []
    for doc in _read_jsonl(datums_path):
        datum = PomdpDatum.from_json(doc)
        candidate = candidates.get(
            datum.datum_id,
            f"<think>{datum.qa.answer_reasoning}</think>{datum.qa.final_answer}",
        )
        record = grade_datum(gateway, datum, candidate, cfg.model.family)
        row = record.to_json()
        row["rubric"] = datum.rubric.to_json()
        rows.append(row)
    _write_jsonl(out, rows)
    _stamp(out + ".meta.json", cfg, {"n_records": len(rows)})
    click.echo(f"grade: {len(rows)} records -> {out}", err=True)


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True),
              help="JSON-lines of {completion, rubric, verdicts, profile}.")
@click.option("--out", required=True, type=click.Path())
@pass_config
def reward(cfg: PipelineConfig, in_path: str, out: str) -> None:
    """Compute reward breakdowns for completion/rubric/verdict rows."""
    from .oracle.types import Rubric, VerdictVector
    from .reward import profile_named, reward_stack

    rows = []
    for row in _read_jsonl(in_path):
        rubric = Rubric.from_json(row["rubric"])
        verdicts = VerdictVector(
            verdicts=row["verdicts"]["verdicts"],
            degenerate=row["verdicts"].get("degenerate", False),
        )
        profile = profile_named(
            row.get("profile", cfg.reward_profile), row.get("family", cfg.model.family)
        )
        breakdown = reward_stack(row["completion"], rubric, verdicts, profile)
        out_row = dict(row)
        out_row["reward"] = breakdown.to_json()
        rows.append(out_row)
    _write_jsonl(out, rows)
    click.echo(f"reward: {len(rows)} rows -> {out}", err=True)


@main.command(name="eval")
@click.option("--datums", "datums_path", required=True, type=click.Path(exists=True))
@click.option("--records-out", required=True, type=click.Path())
@click.option("--report-out", required=True, type=click.Path())
@pass_config
def eval_cmd(cfg: PipelineConfig, datums_path: str, records_out: str, report_out: str) -> None:
    """Generate with the model endpoint, grade, and aggregate."""
    from .datum import PomdpDatum
    from .evalharness import aggregate, run_eval
    from .modelclient import model_fn_for
    from .oracle import OracleGateway, backend_for

    gateway = OracleGateway(backend_for(cfg.oracle.endpoint, cfg.oracle.api_key, cfg.oracle.timeout), cfg.oracle)
    datums = [PomdpDatum.from_json(d) for d in _read_jsonl(datums_path)]
    model = model_fn_for(cfg.model)
    records = run_eval(datums, model, gateway, family=cfg.model.family)
    _write_jsonl(records_out, [r.to_json() for r in records])
    report = aggregate(records)
    with open(report_out, "w", encoding="utf-8") as fh:
        fh.write(canonical_json({"report": report.to_json(), "config": cfg.resolved()}) + "\n")
    click.echo(f"eval: {len(records)} records -> {records_out}; report -> {report_out}", err=True)


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@pass_config
def report(cfg: PipelineConfig, records_path: str, out: str) -> None:
    """Re-aggregate a persisted record file into an AggregateReport."""
    from .evalharness import EvalRecord, aggregate

    records = [EvalRecord.from_json(r) for r in _read_jsonl(records_path)]
    rep = aggregate(records)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(canonical_json({"report": rep.to_json(), "config": cfg.resolved()}) + "\n")
    click.echo(f"report: {len(records)} records -> {out}", err=True)


@main.command()
@click.option("--base", required=True, type=click.Path(exists=True))
@click.option("--tuned", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--method", type=click.Choice(["della", "breadcrumbs", "dare"]), default="della")
@click.option("--rho", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--weight", type=float, default=1.0)
@click.option("--merge-seed", "merge_seed", type=int, default=42)
@click.option("--aim-activations", type=click.Path(exists=True), default=None)
@click.option("--aim-quantile", type=float, default=None)
@click.option("--out-dtype", type=click.Choice(["F32", "F64", "F16", "BF16"]), default=None)
@pass_config
def merge(cfg: PipelineConfig, base: str, tuned: str, out: str, method: str,
          rho: float | None, gamma: float | None, weight: float, merge_seed: int,
          aim_activations: str | None, aim_quantile: float | None, out_dtype: str | None) -> None:
    """Filter the task vector and merge it back into the base archive."""
    from .merge import MergeConfig, apply_merge, load_archive, save_archive

    mcfg = MergeConfig(method=method, rho=rho, gamma=gamma, weight=weight,
                       seed=merge_seed, aim_quantile=aim_quantile, out_dtype=out_dtype)
    base_a = load_archive(base)
    tuned_a = load_archive(tuned)
    activations = load_archive(aim_activations) if aim_activations else None
    merged = apply_merge(base_a, tuned_a, mcfg, activations)
    save_archive(merged, out)
    _stamp(out + ".meta.json", cfg, {"merge": mcfg.to_json(), "n_tensors": len(merged.entries)})
    click.echo(f"merge: {len(merged.entries)} tensors -> {out}", err=True)


@main.command()
@click.option("--export", "export_path", required=True, type=click.Path(exists=True))
@click.option("--out-json", required=True, type=click.Path())
@click.option("--out-markdown", required=True, type=click.Path())
@click.option("--resamples", type=int, default=1000)
@pass_config
def stats(cfg: PipelineConfig, export_path: str, out_json: str, out_markdown: str, resamples: int) -> None:
    """Run the annotation analysis engine over an export."""
    from .stats.report import run_analysis

    artifact = run_analysis(export_path, out_json, out_markdown,
                            bootstrap_resamples=resamples, seed=cfg.seed)
    click.echo(
        f"stats: {artifact['n_annotations']} annotations, {artifact['n_dyads']} dyads -> {out_json}",
        err=True,
    )


@main.command()
@click.option("--port", type=int, default=None)
@click.option("--data-dir", type=click.Path(), default=None)
@click.option("--tokens-file", type=click.Path(exists=True), default=None)
@click.option("--redisplay-probability", type=float, default=None,
              help="Chance a pair is re-shown for self-consistency probes (default 0).")
@pass_config
def serve(cfg: PipelineConfig, port: int | None, data_dir: str | None,
          tokens_file: str | None, redisplay_probability: float | None) -> None:
    """Run the annotation HTTP service."""
    from .service import serve as serve_forever

    resolved_port = port if port is not None else cfg.serve_port
    resolved_dir = data_dir if data_dir is not None else cfg.serve_data_dir
    resolved_tokens = tokens_file if tokens_file is not None else cfg.serve_tokens_file
    resolved_prob = (
        redisplay_probability if redisplay_probability is not None else cfg.redisplay_probability
    )
    click.echo(f"serving annotation API on 127.0.0.1:{resolved_port}", err=True)
    serve_forever(resolved_port, resolved_dir, resolved_tokens, resolved_prob)


def run(argv: list[str] | None = None) -> int:
    """Programmatic entry point returning the exit code (0 ok, 1 failure, 2 usage)."""
    try:
        main.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 2
    except Exception as exc:
        log.error("stage failed: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(run())
