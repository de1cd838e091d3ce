"""Command-line pipeline: index, run, rerank, eval, pairs."""

from __future__ import annotations

import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import pairs as ws
from .analysis import AnalysisConfig, bundled_stopwords, load_stopword_list
from .errors import QreformError, UsageError
from .evaluation import holm_bonferroni, paired_significance, evaluate_run, METRICS
from .generation import FixtureScorer, HttpGenerationClient
from .passages import Selector
from .pipeline import (
    GEN_MODES,
    RUN_MODES,
    GeneratorConfig,
    PipelineConfig,
    load_pipeline_config,
    run_topics,
)
from .retrieval import (
    Bm25Params,
    build_index,
    iter_corpus,
    load_index,
    rerank_maxpassage,
    save_index,
)
from .trecio import load_qrels, load_run, load_topics, validate_run_file, write_run

log = logging.getLogger(__name__)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Sparse retrieval and query-reformulation experiments."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _die(error: Exception) -> None:
    click.echo(f"error: {error}", err=True)
    sys.exit(1)


@main.command("index")
@click.argument("corpus", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@click.option("--stem/--no-stem", default=True, show_default=True)
@click.option(
    "--stopwords",
    default="bundled",
    show_default=True,
    help="Stopword source: 'bundled', 'none', or a file path.",
)
def cmd_index(corpus: str, out: str, stem: bool, stopwords: str):
    """Build an inverted index from a corpus file and persist it."""
    try:
        if stopwords == "bundled":
            stoplist = bundled_stopwords()
        elif stopwords == "none":
            stoplist = frozenset()
        else:
            stoplist = load_stopword_list(stopwords)
        config = AnalysisConfig(stem=stem, stopwords=stoplist)
        index = build_index(iter_corpus(corpus), config)
        save_index(index, out)
    except QreformError as e:
        _die(e)
    click.echo(f"indexed {index.doc_count} documents -> {out}")


def _apply_overrides(config: PipelineConfig, **kw) -> PipelineConfig:
    if kw.get("k1") is not None or kw.get("b") is not None:
        config = replace(
            config,
            bm25=Bm25Params(
                k1=kw["k1"] if kw.get("k1") is not None else config.bm25.k1,
                b=kw["b"] if kw.get("b") is not None else config.bm25.b,
            ),
        )
    prf = config.prf
    for name in ("fb_docs", "fb_terms", "rm3_lambda"):
        if kw.get(name) is not None:
            prf = replace(prf, **{name: kw[name]})
    config = replace(config, prf=prf)
    ctx = config.context
    if kw.get("selector") is not None:
        ctx = replace(ctx, selector=Selector(kw["selector"]))
    if kw.get("num_passages") is not None:
        ctx = replace(ctx, num_passages=kw["num_passages"])
    if kw.get("fb_docs") is not None:
        ctx = replace(ctx, fb_docs=kw["fb_docs"])
    config = replace(config, context=ctx)
    fusion = config.fusion
    for name in ("k_rm3", "k_gen", "beta"):
        if kw.get(name) is not None:
            fusion = replace(fusion, **{name: kw[name]})
    config = replace(config, fusion=fusion)
    gen = config.generator
    if kw.get("endpoint"):
        gen = replace(gen, endpoint=kw["endpoint"], fixture=None)
    if kw.get("fixture"):
        gen = replace(gen, fixture=kw["fixture"], endpoint=None)
    config = replace(config, generator=gen)
    if kw.get("depth") is not None:
        config = replace(config, depth=kw["depth"])
    if kw.get("workers") is not None:
        config = replace(config, workers=kw["workers"])
    return config


@main.command("run")
@click.argument("topics", type=click.Path(exists=True))
@click.argument("index_path", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(RUN_MODES), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--tag", default=None, help="Run tag; defaults to the mode name.")
@click.option("--k1", type=float, default=None)
@click.option("--b", type=float, default=None)
@click.option("--depth", type=int, default=None)
@click.option("--fb-docs", type=int, default=None)
@click.option("--fb-terms", type=int, default=None)
@click.option("--rm3-lambda", type=float, default=None)
@click.option("--selector", type=click.Choice([s.value for s in Selector]), default=None)
@click.option("--num-passages", type=int, default=None)
@click.option("--k-rm3", type=float, default=None)
@click.option("--k-gen", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--endpoint", default=None, help="Generation service base URL.")
@click.option("--fixture", type=click.Path(exists=True), default=None)
@click.option("--workers", type=int, default=None)
def cmd_run(topics, index_path, mode, out, config_path, tag, **overrides):
    """Retrieve (and optionally reformulate) a topic set into a run file."""
    try:
        config = _apply_overrides(load_pipeline_config(config_path), **overrides)
        if mode in GEN_MODES:
            config.generator.require_one_source()
        index = load_index(index_path)
        topic_map = load_topics(topics)
        rankings = run_topics(index, topic_map, mode, config)
        write_run(rankings, tag or mode, out)
        validate_run_file(out)
    except QreformError as e:
        _die(e)
    click.echo(f"wrote {sum(len(r) for r in rankings.values())} results -> {out}")


@main.command("rerank")
@click.argument("run_path", type=click.Path(exists=True))
@click.argument("topics", type=click.Path(exists=True))
@click.argument("index_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True)
@click.option("--endpoint", default=None, help="Scoring service base URL.")
@click.option("--score-fixture", type=click.Path(exists=True), default=None)
@click.option("--window", type=int, default=128, show_default=True)
@click.option("--stride", type=int, default=64, show_default=True)
@click.option("--tag", default=None, help="Defaults to the input tag + '.rr'.")
def cmd_rerank(run_path, topics, index_path, out, endpoint, score_fixture, window, stride, tag):
    """Re-rank a run by max passage score from the external scorer."""
    try:
        if bool(endpoint) == bool(score_fixture):
            raise UsageError("provide exactly one of --endpoint or --score-fixture")
        scorer = (
            FixtureScorer(score_fixture) if score_fixture else HttpGenerationClient(endpoint)
        )
        index = load_index(index_path)
        topic_map = load_topics(topics)
        rankings = load_run(run_path)
        with open(run_path, encoding="utf-8") as f:
            first = f.readline().split()
        in_tag = first[5] if len(first) == 6 else "run"
        reranked = {}
        for qid, ranking in rankings.items():
            if qid not in topic_map:
                raise UsageError(f"run query {qid} missing from topics file")
            reranked[qid] = rerank_maxpassage(
                ranking, topic_map[qid], scorer, index, window, stride
            )
        write_run(reranked, tag or f"{in_tag}.rr", out)
        validate_run_file(out)
    except QreformError as e:
        _die(e)
    click.echo(f"re-ranked {len(reranked)} queries -> {out}")


@main.command("eval")
@click.argument("runs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--qrels", type=click.Path(exists=True), required=True)
@click.option(
    "--metrics",
    default=",".join(METRICS),
    show_default=True,
    help="Comma-separated metric ids.",
)
@click.option("--baseline", type=click.Path(exists=True), default=None)
@click.option("--alpha", type=float, default=0.05, show_default=True)
def cmd_eval(runs, qrels, metrics, baseline, alpha):
    """Evaluate run files; optionally test significance against a baseline
    with Holm-Bonferroni correction across the comparison family."""
    try:
        qrels_data = load_qrels(qrels)
        metric_ids = tuple(m.strip() for m in metrics.split(",") if m.strip())
        reports = {}
        for run_path in runs:
            rankings = load_run(run_path)
            reports[run_path] = evaluate_run(rankings, qrels_data, metric_ids)

        significance = {}
        if baseline:
            base_report = evaluate_run(load_run(baseline), qrels_data, metric_ids)
            base_qids = set(base_report.per_query)
            raw = []
            keys = []
            for run_path, report in reports.items():
                run_qids = set(report.per_query)
                if run_qids != base_qids:
                    missing = sorted(base_qids ^ run_qids)
                    raise UsageError(
                        f"query ids differ between {run_path} and baseline: {missing}"
                    )
                for m in metric_ids:
                    qids = sorted(base_qids)
                    a = [report.per_query[q][m] for q in qids]
                    b = [base_report.per_query[q][m] for q in qids]
                    raw.append(paired_significance(a, b))
                    keys.append((run_path, m))
            adjusted = holm_bonferroni(raw)
            significance = dict(zip(keys, adjusted))

        header = ["run"] + list(metric_ids)
        click.echo("\t".join(header))
        for run_path, report in reports.items():
            cells = [Path(run_path).name]
            for m in metric_ids:
                value = f"{report.mean(m):.4f}"
                p = significance.get((run_path, m))
                if p is not None and p < alpha:
                    value += "*"
                cells.append(value)
            click.echo("\t".join(cells))
            if report.skipped:
                click.echo(
                    f"# {Path(run_path).name}: skipped unjudged queries: "
                    f"{', '.join(report.skipped)}"
                )
        if baseline:
            click.echo(f"# '*' = adjusted p < {alpha} vs baseline {Path(baseline).name}")
    except QreformError as e:
        _die(e)


_FILTER_LETTERS = {"o": "overlap", "e": "effectiveness", "s": "stopwords"}


@main.command("pairs")
@click.argument("qrels", type=click.Path(exists=True))
@click.argument("topics", type=click.Path(exists=True))
@click.argument("index_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True)
@click.option(
    "--filters",
    "filter_spec",
    default="",
    help="Filter chain, e.g. 'E+S' or 'O'. Empty exports the initial pool.",
)
@click.option("--overlap-k", type=int, default=10, show_default=True)
@click.option("--delta-o", type=int, default=5, show_default=True)
@click.option("--delta-e", type=float, default=0.0, show_default=True)
@click.option("--metric", default="dcg@10", show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
def cmd_pairs(qrels, topics, index_path, out, filter_spec, overlap_k, delta_o, delta_e, metric, report_path):
    """Build, filter and export weakly supervised training pairs."""
    try:
        qrels_data = load_qrels(qrels)
        topic_map = load_topics(topics)
        index = load_index(index_path)
        config = ws.FilterConfig(
            overlap_k=overlap_k, delta_o=delta_o, delta_e=delta_e, metric=metric
        )
        pool = ws.build_initial_pool(qrels_data, topic_map)
        named = []
        for letter in (p for p in filter_spec.lower().split("+") if p):
            if letter not in _FILTER_LETTERS:
                raise UsageError(f"unknown filter {letter!r}; use O, E or S")
            name = _FILTER_LETTERS[letter]
            if name == "overlap":
                named.append((name, lambda ps: ws.filter_overlap(ps, index, config)))
            elif name == "effectiveness":
                named.append(
                    (name, lambda ps: ws.filter_effectiveness(ps, index, qrels_data, config))
                )
            else:
                named.append(
                    (name, lambda ps: ws.filter_stopwords(ps, index.analysis.stopwords))
                )
        survivors, stages = ws.run_filter_pipeline(pool, named)
        ws.export_pairs(survivors, out)
        lines = ["stage\tpool_size\tavg_len_qx\tavg_len_qy"]
        lines += [
            f"{s.name}\t{s.pool_size}\t{s.avg_len_qx:.2f}\t{s.avg_len_qy:.2f}"
            for s in stages
        ]
        report_text = "\n".join(lines)
        click.echo(report_text)
        if report_path:
            Path(report_path).write_text(report_text + "\n", encoding="utf-8")
    except QreformError as e:
        _die(e)
    click.echo(f"# exported {len(survivors)} pairs -> {out}")


if __name__ == "__main__":
    main()
