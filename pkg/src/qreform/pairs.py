"""Weakly supervised query-pair pools and quality filters.

Queries that share a relevant document are assumed to express the same
information need; the initial all-pairs pool built on that assumption is
then cleaned by overlap, effectiveness and stopword filters before
export as fine-tuning data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import ConfigurationError, IngestionError
from .evaluation import Qrels, metric
from .retrieval import DEFAULT_DEPTH, Index, Ranking, WeightedQuery, search

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryPair:
    qx_id: str
    qy_id: str
    qx: str  # source query text
    qy: str  # target query text
    shared_docs: tuple[str, ...] = ()
    overlap: int | None = None
    eff_delta: float | None = None


@dataclass(frozen=True)
class FilterConfig:
    overlap_k: int = 10
    delta_o: int = 5
    delta_e: float = 0.0
    metric: str = "dcg@10"

    def __post_init__(self):
        if not self.overlap_k >= self.delta_o >= 0:
            raise ConfigurationError(
                f"need overlap_k >= delta_o >= 0, got {self.overlap_k}, {self.delta_o}"
            )


def build_initial_pool(qrels: Qrels, queries: dict[str, str]) -> list[QueryPair]:
    """All ordered pairs of distinct queries sharing >= 1 relevant document.

    Both (qx, qy) and (qy, qx) orientations are emitted; the effectiveness
    filter later keeps only improving directions. Pairs whose two texts
    are identical are excluded.
    """
    for qid in qrels.query_ids():
        if qid not in queries:
            raise IngestionError(f"qrels reference unknown query id: {qid}")
    relevant: dict[str, set[str]] = {
        qid: qrels.relevant_docs(qid) for qid in sorted(queries)
    }
    pool = []
    qids = sorted(queries)
    for i, qa in enumerate(qids):
        for qb in qids[i + 1 :]:
            shared = relevant[qa] & relevant[qb]
            if not shared or queries[qa] == queries[qb]:
                continue
            docs = tuple(sorted(shared))
            pool.append(QueryPair(qa, qb, queries[qa], queries[qb], docs))
            pool.append(QueryPair(qb, qa, queries[qb], queries[qa], docs))
    return pool


def _rankings_by_text(
    pairs: Iterable[QueryPair], index: Index, k: int
) -> dict[str, Ranking]:
    cache: dict[str, Ranking] = {}
    for pair in pairs:
        for text in (pair.qx, pair.qy):
            if text not in cache:
                query = WeightedQuery.from_text(text, index.analysis)
                cache[text] = search(index, query, k=k)
    return cache


def filter_overlap(
    pairs: list[QueryPair], index: Index, config: FilterConfig
) -> list[QueryPair]:
    """Keep pairs whose top-K result lists share at least delta_o documents."""
    rankings = _rankings_by_text(pairs, index, config.overlap_k)
    survivors = []
    for pair in pairs:
        docs_x = set(rankings[pair.qx].doc_ids())
        docs_y = set(rankings[pair.qy].doc_ids())
        overlap = len(docs_x & docs_y)
        if overlap >= config.delta_o:
            survivors.append(replace(pair, overlap=overlap))
    return survivors


def filter_effectiveness(
    pairs: list[QueryPair], index: Index, qrels: Qrels, config: FilterConfig
) -> list[QueryPair]:
    """Keep pairs where the target query strictly beats the source query
    on the configured metric (default DCG@10). Queries lacking judgments
    drop their pairs with a warning rather than failing the run."""
    values: dict[str, float | None] = {}

    def effectiveness(qid: str, text: str) -> float | None:
        if qid not in values:
            if not qrels.has_judgments(qid) or not qrels.relevant_docs(qid):
                values[qid] = None
            else:
                query = WeightedQuery.from_text(text, index.analysis)
                ranking = search(index, query, k=DEFAULT_DEPTH)
                values[qid] = metric(
                    Ranking(qid, ranking.entries), qrels, config.metric
                )
        return values[qid]

    survivors = []
    for pair in pairs:
        m_x = effectiveness(pair.qx_id, pair.qx)
        m_y = effectiveness(pair.qy_id, pair.qy)
        if m_x is None or m_y is None:
            log.warning(
                "dropping pair (%s, %s): missing relevance judgments",
                pair.qx_id,
                pair.qy_id,
            )
            continue
        delta = m_y - m_x
        if delta > config.delta_e:
            survivors.append(replace(pair, eff_delta=delta))
    return survivors


def filter_stopwords(
    pairs: list[QueryPair], stoplist: frozenset[str]
) -> list[QueryPair]:
    """Remove stoplist words from each target query (case-insensitive,
    surface forms); pairs whose target empties out are dropped."""
    survivors = []
    for pair in pairs:
        kept = [w for w in pair.qy.split() if w.lower() not in stoplist]
        if not kept:
            continue
        survivors.append(replace(pair, qy=" ".join(kept)))
    return survivors


PairFilter = Callable[[list[QueryPair]], list[QueryPair]]


def compose_filters(
    pairs: list[QueryPair], filters: Sequence[PairFilter]
) -> list[QueryPair]:
    """Apply filters left to right; an empty sequence is the identity."""
    for f in filters:
        pairs = f(pairs)
    return pairs


@dataclass(frozen=True)
class StageStats:
    name: str
    pool_size: int
    avg_len_qx: float
    avg_len_qy: float


def stage_stats(name: str, pairs: list[QueryPair]) -> StageStats:
    n = len(pairs)
    if n == 0:
        return StageStats(name, 0, 0.0, 0.0)
    return StageStats(
        name,
        n,
        sum(len(p.qx.split()) for p in pairs) / n,
        sum(len(p.qy.split()) for p in pairs) / n,
    )


def run_filter_pipeline(
    pairs: list[QueryPair], named_filters: Sequence[tuple[str, PairFilter]]
) -> tuple[list[QueryPair], list[StageStats]]:
    """Apply filters in order, recording pool size and average query
    lengths after each stage (the training-pool summary schema)."""
    stages = [stage_stats("initial", pairs)]
    for name, f in named_filters:
        pairs = f(pairs)
        stages.append(stage_stats(name, pairs))
    return pairs, stages


def export_pairs(pairs: Iterable[QueryPair], path: str | Path) -> None:
    """Write source/target texts as two-column UTF-8 TSV, no header."""
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(f"{pair.qx}\t{pair.qy}\n")


def load_pairs(path: str | Path) -> list[tuple[str, str]]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise IngestionError(f"{path}:{lineno}: expected 2 TSV columns")
            out.append((parts[0], parts[1]))
    return out
