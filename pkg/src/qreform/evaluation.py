"""TREC-style effectiveness metrics and significance testing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import stats

from .errors import ConfigurationError, UsageError
from .retrieval import Ranking


@dataclass(frozen=True)
class Qrels:
    """Relevance judgments: (query id, doc id) -> integer grade >= 0."""

    judgments: dict[tuple[str, str], int]

    def __post_init__(self):
        for (qid, doc), grade in self.judgments.items():
            if grade < 0:
                raise ConfigurationError(
                    f"negative relevance grade for ({qid}, {doc}): {grade}"
                )

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.judgments.get((query_id, doc_id), 0)

    def relevant_docs(self, query_id: str) -> set[str]:
        return {
            doc for (qid, doc), grade in self.judgments.items()
            if qid == query_id and grade > 0
        }

    def query_ids(self) -> set[str]:
        return {qid for qid, _ in self.judgments}

    def has_judgments(self, query_id: str) -> bool:
        return any(qid == query_id for qid, _ in self.judgments)


def _gain(grade: int, exponential: bool) -> float:
    return (2.0**grade - 1.0) if exponential else float(grade)


def dcg(ranking: Ranking, qrels: Qrels, depth: int, exponential: bool = False) -> float:
    """Sum of gain(rel_i) / log2(i + 1) over the top `depth` entries."""
    total = 0.0
    for i, (doc_id, _) in enumerate(ranking.entries[:depth], start=1):
        grade = qrels.grade(ranking.query_id, doc_id)
        if grade > 0:
            total += _gain(grade, exponential) / math.log2(i + 1)
    return total


def ideal_dcg(query_id: str, qrels: Qrels, depth: int, exponential: bool = False) -> float:
    grades = sorted(
        (g for (qid, _), g in qrels.judgments.items() if qid == query_id and g > 0),
        reverse=True,
    )
    return sum(
        _gain(g, exponential) / math.log2(i + 1)
        for i, g in enumerate(grades[:depth], start=1)
    )


def ndcg(ranking: Ranking, qrels: Qrels, depth: int, exponential: bool = False) -> float:
    ideal = ideal_dcg(ranking.query_id, qrels, depth, exponential)
    if ideal == 0:
        raise UsageError(f"nDCG undefined: no relevant docs for {ranking.query_id}")
    return dcg(ranking, qrels, depth, exponential) / ideal


def average_precision(ranking: Ranking, qrels: Qrels) -> float:
    relevant = qrels.relevant_docs(ranking.query_id)
    if not relevant:
        raise UsageError(f"AP undefined: no relevant docs for {ranking.query_id}")
    hits = 0
    total = 0.0
    for i, (doc_id, _) in enumerate(ranking.entries, start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def reciprocal_rank(ranking: Ranking, qrels: Qrels, depth: int | None = None) -> float:
    entries = ranking.entries if depth is None else ranking.entries[:depth]
    for i, (doc_id, _) in enumerate(entries, start=1):
        if qrels.grade(ranking.query_id, doc_id) > 0:
            return 1.0 / i
    return 0.0


def recall(ranking: Ranking, qrels: Qrels, depth: int) -> float:
    relevant = qrels.relevant_docs(ranking.query_id)
    if not relevant:
        raise UsageError(f"recall undefined: no relevant docs for {ranking.query_id}")
    retrieved = {doc_id for doc_id, _ in ranking.entries[:depth]}
    return len(relevant & retrieved) / len(relevant)


METRICS = ("map", "mrr", "ndcg@10", "ndcg@20", "recall@1000", "dcg@10")


def metric(ranking: Ranking, qrels: Qrels, which: str, depth: int | None = None) -> float:
    """Evaluate one metric id; `which` may carry an @depth suffix.

    Raises UsageError for a query with no relevant documents (the report
    level excludes such queries from means).
    """
    name, _, suffix = which.lower().partition("@")
    if suffix:
        depth = int(suffix)
    if name in ("map", "ap"):
        return average_precision(ranking, qrels)
    if name in ("mrr", "rr"):
        return reciprocal_rank(ranking, qrels, depth)
    if name == "ndcg":
        return ndcg(ranking, qrels, depth if depth is not None else 10)
    if name == "dcg":
        return dcg(ranking, qrels, depth if depth is not None else 10)
    if name == "recall":
        return recall(ranking, qrels, depth if depth is not None else 1000)
    raise ConfigurationError(f"unknown metric: {which}")


@dataclass
class MetricReport:
    """Per-query metric values plus arithmetic means over evaluated queries."""

    per_query: dict[str, dict[str, float]] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def mean(self, which: str) -> float:
        values = [row[which] for row in self.per_query.values() if which in row]
        if not values:
            return float("nan")
        return sum(values) / len(values)

    def values(self, which: str) -> dict[str, float]:
        return {
            qid: row[which] for qid, row in self.per_query.items() if which in row
        }


def evaluate_run(
    rankings: dict[str, Ranking], qrels: Qrels, metrics: tuple[str, ...] = METRICS
) -> MetricReport:
    """Evaluate every ranking that has judged queries; queries absent from
    the qrels, or with no relevant documents, are skipped with a note."""
    report = MetricReport()
    for qid in sorted(rankings):
        if not qrels.has_judgments(qid) or not qrels.relevant_docs(qid):
            report.skipped.append(qid)
            continue
        report.per_query[qid] = {
            m: metric(rankings[qid], qrels, m) for m in metrics
        }
    return report


def paired_significance(per_query_a: list[float], per_query_b: list[float]) -> float:
    """Two-sided paired t-test p-value over query-aligned metric vectors.

    Zero-variance differences degenerate: all-zero differences give
    p = 1.0; a consistent nonzero difference gives p = 0.0 (the sign is
    fully determined).
    """
    if len(per_query_a) != len(per_query_b):
        raise UsageError(
            f"paired vectors differ in length: {len(per_query_a)} vs {len(per_query_b)}"
        )
    n = len(per_query_a)
    if n < 2:
        raise UsageError("paired t-test needs at least 2 aligned queries")
    diffs = [a - b for a, b in zip(per_query_a, per_query_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t_stat = mean / math.sqrt(var / n)
    return 2.0 * stats.t.sf(abs(t_stat), df=n - 1)


def holm_bonferroni(p_values: list[float]) -> list[float]:
    """Step-down adjusted p-values, returned in the input order.

    Sorted ascending, the i-th (1-based) raw p is scaled by (m - i + 1);
    a running maximum enforces monotonicity and values clamp at 1.
    """
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ConfigurationError(f"p-value out of [0,1]: {p}")
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 0.0
    for step, idx in enumerate(order, start=1):
        running = max(running, min(1.0, (m - step + 1) * p_values[idx]))
        adjusted[idx] = running
    return adjusted
