"""Classical pseudo-relevance-feedback expansion: RM3, Bo1, KL.

All three mine the top-ranked feedback documents for expansion terms;
they differ in how candidate terms are scored and how the result is
combined with the original query.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from enum import Enum

from .analysis import analyze
from .errors import ConfigurationError
from .retrieval import Index, Ranking, WeightedQuery

log = logging.getLogger(__name__)


class DfrModel(Enum):
    BO1 = "bo1"
    KL = "kl"


@dataclass(frozen=True)
class PrfConfig:
    fb_docs: int = 10
    fb_terms: int = 10
    rm3_lambda: float = 0.5  # weight of the original query in the mixture

    def __post_init__(self):
        if self.fb_docs < 1:
            raise ConfigurationError(f"fb_docs must be >= 1, got {self.fb_docs}")
        if self.fb_terms < 0:
            raise ConfigurationError(f"fb_terms must be >= 0, got {self.fb_terms}")
        if not 0.0 <= self.rm3_lambda <= 1.0:
            raise ConfigurationError(
                f"rm3_lambda must be in [0,1], got {self.rm3_lambda}"
            )


def _feedback_term_counts(
    index: Index, ranking: Ranking, fb_docs: int
) -> list[tuple[str, dict[str, int], int]]:
    """Per feedback document: (doc id, term counts, analyzed length)."""
    docs = []
    for doc_id, _ in ranking.entries[:fb_docs]:
        terms = analyze(index.doc_store[doc_id], index.analysis)
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        docs.append((doc_id, counts, len(terms)))
    return docs


def _degenerate(query: WeightedQuery) -> WeightedQuery:
    out = query.normalized()
    return WeightedQuery(out.weights, source_text=query.source_text, feedback_applied=False)


def expand_rm3(
    index: Index, query: WeightedQuery, ranking: Ranking, config: PrfConfig
) -> WeightedQuery:
    """Relevance-model expansion: lambda * P(t|q) + (1-lambda) * RM1(t).

    RM1 weights each feedback document by its retrieval score share and
    each term by its in-document maximum-likelihood probability; the top
    fb_terms candidates are kept and renormalized, so the output is a
    probability distribution. An empty ranking or fb_terms=0 degenerates
    to the normalized original query, flagged via feedback_applied=False.
    """
    original = query.normalized()
    if not ranking or config.fb_terms == 0 or config.rm3_lambda == 1.0:
        if not ranking:
            log.warning("RM3: empty feedback ranking for %r", query.source_text)
        return _degenerate(query)

    docs = _feedback_term_counts(index, ranking, config.fb_docs)
    score_total = sum(score for _, score in ranking.entries[: config.fb_docs])
    rm1: dict[str, float] = {}
    if score_total > 0:
        for (doc_id, counts, length), (_, score) in zip(
            docs, ranking.entries[: config.fb_docs]
        ):
            if length == 0:
                continue
            doc_weight = score / score_total
            for term, tf in counts.items():
                rm1[term] = rm1.get(term, 0.0) + (tf / length) * doc_weight

    top = sorted(rm1.items(), key=lambda item: (-item[1], item[0]))[: config.fb_terms]
    feedback_mass = sum(w for _, w in top)
    if feedback_mass == 0:
        return _degenerate(query)

    lam = config.rm3_lambda
    combined: dict[str, float] = {
        t: lam * w for t, w in original.weights.items()
    }
    for term, w in top:
        combined[term] = combined.get(term, 0.0) + (1.0 - lam) * (w / feedback_mass)
    return WeightedQuery(combined, source_text=query.source_text, feedback_applied=True)


def bo1_weight(tf_feedback: int, collection_freq: int, doc_count: int) -> float:
    """Bose-Einstein information score: tf * log2((1+Pn)/Pn) + log2(1+Pn),
    Pn = collection frequency / number of documents."""
    p_n = collection_freq / doc_count
    return tf_feedback * math.log2((1.0 + p_n) / p_n) + math.log2(1.0 + p_n)


def kl_weight(
    tf_feedback: int, feedback_tokens: int, collection_freq: int, total_tokens: int
) -> float:
    """Kullback-Leibler information score between the feedback-set and
    collection term distributions; non-positive when the term is no more
    frequent in the feedback set than in the collection at large."""
    p_x = tf_feedback / feedback_tokens
    p_c = collection_freq / total_tokens
    return p_x * math.log2(p_x / p_c)


def expand_dfr(
    index: Index,
    query: WeightedQuery,
    ranking: Ranking,
    model: DfrModel,
    config: PrfConfig,
) -> WeightedQuery:
    """Divergence-from-randomness expansion (Bo1 or KL).

    Original term weights are kept as-is; the top fb_terms feedback terms
    (by information score, positive scores only) are added with weights
    normalized by the maximum information score.
    """
    if not ranking or config.fb_terms == 0:
        if not ranking:
            log.warning("DFR: empty feedback ranking for %r", query.source_text)
        return _degenerate(query)

    docs = _feedback_term_counts(index, ranking, config.fb_docs)
    tf_x: dict[str, int] = {}
    feedback_tokens = 0
    for _, counts, length in docs:
        feedback_tokens += length
        for term, tf in counts.items():
            tf_x[term] = tf_x.get(term, 0) + tf

    scores: dict[str, float] = {}
    for term, tf in tf_x.items():
        cf = index.collection_freq.get(term, 0)
        if cf == 0:
            continue
        if model is DfrModel.BO1:
            info = bo1_weight(tf, cf, index.doc_count)
        else:
            info = kl_weight(tf, feedback_tokens, cf, index.total_tokens)
        if info > 0:
            scores[term] = info

    top = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[: config.fb_terms]
    if not top:
        return _degenerate(query)
    max_info = top[0][1]

    combined = dict(query.weights)
    for term, info in top:
        combined[term] = combined.get(term, 0.0) + info / max_info
    return WeightedQuery(combined, source_text=query.source_text, feedback_applied=True)


_SERIALIZED_TERM = re.compile(r"^(?P<term>[^\s^]+)\^(?P<weight>[0-9.eE+-]+)$")


def serialize_weighted_query(query: WeightedQuery, precision: int = 4) -> str:
    """Render as whitespace-separated term^weight tokens, best terms first."""
    ordered = sorted(query.weights.items(), key=lambda item: (-item[1], item[0]))
    return " ".join(f"{t}^{w:.{precision}f}" for t, w in ordered)


def parse_weighted_query(text: str) -> WeightedQuery:
    weights: dict[str, float] = {}
    for token in text.split():
        m = _SERIALIZED_TERM.match(token)
        if not m:
            raise ConfigurationError(f"bad weighted-query token: {token!r}")
        weights[m.group("term")] = weights.get(m.group("term"), 0.0) + float(
            m.group("weight")
        )
    return WeightedQuery(weights, source_text=text)
