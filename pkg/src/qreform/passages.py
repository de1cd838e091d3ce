"""Sliding-window passaging and feedback-context selection.

Documents are cut into overlapping windows of raw (unstemmed) tokens;
the selected passages feed the reformulation prompt as natural text.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ConfigurationError, UsageError
from .retrieval import Index, Ranking, WeightedQuery, score_passage


class Selector(Enum):
    FIRSTP = "firstp"
    TOPP = "topp"
    MAXP = "maxp"


@dataclass
class Passage:
    doc_id: str
    window_index: int
    tokens: list[str]
    text: str
    score: float = 0.0


@dataclass(frozen=True)
class ContextConfig:
    """Feedback-context geometry: K docs, w-token windows with w/2 overlap,
    M selected passages (at most 3, keeping M*w within the 512-token
    generator input ceiling)."""

    fb_docs: int = 10
    window: int = 128
    stride: int = 64
    num_passages: int = 1
    selector: Selector = Selector.TOPP

    def __post_init__(self):
        if self.stride * 2 != self.window:
            raise ConfigurationError(
                f"stride must be window/2: window={self.window} stride={self.stride}"
            )
        if not 1 <= self.num_passages <= 3:
            raise ConfigurationError(
                f"num_passages must be in 1..3, got {self.num_passages}"
            )
        if self.fb_docs < 1:
            raise ConfigurationError(f"fb_docs must be >= 1, got {self.fb_docs}")


def split_passages(doc_id: str, text: str, window: int, stride: int) -> list[Passage]:
    """Cut whitespace tokens into windows starting at 0, stride, 2*stride, ...

    The final window may be short; generation stops once a window reaches
    the end of the document, so no empty trailing passage is emitted.
    """
    if window < 2:
        raise ConfigurationError(f"window must be >= 2, got {window}")
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    tokens = text.split()
    if not tokens:
        return []
    passages = []
    start = 0
    index = 0
    while True:
        chunk = tokens[start : start + window]
        passages.append(
            Passage(doc_id=doc_id, window_index=index, tokens=chunk, text=" ".join(chunk))
        )
        if start + window >= len(tokens):
            break
        start += stride
        index += 1
    return passages


def _scored_passages(
    index: Index, query: WeightedQuery, ranking: Ranking, config: ContextConfig
) -> list[tuple[int, Passage]]:
    """All passages of the top fb_docs feedback documents, scored, tagged
    with their document's rank for tie-breaking."""
    avg_len = index.avg_passage_length(config.window, config.stride)
    out = []
    for rank, (doc_id, _) in enumerate(ranking.entries[: config.fb_docs]):
        text = index.doc_store.get(doc_id)
        if text is None:
            raise ConfigurationError(f"feedback doc not in doc store: {doc_id}")
        for passage in split_passages(doc_id, text, config.window, config.stride):
            passage.score = score_passage(query, passage, index, avg_len=avg_len)
            out.append((rank, passage))
    return out


def _top_m(candidates: list[tuple[int, Passage]], m: int) -> list[Passage]:
    # descending score; ties by feedback rank then window position
    ordered = sorted(
        candidates, key=lambda item: (-item[1].score, item[0], item[1].window_index)
    )
    return [p for _, p in ordered[:m]]


def select_context(
    index: Index, query: WeightedQuery, ranking: Ranking, config: ContextConfig
) -> list[Passage]:
    """Pick at most M context passages from the feedback documents.

    FirstP considers only each document's first passage; TopP considers
    every passage of every feedback document; MaxP first reduces each
    document to its best passage, then picks across documents. Fewer
    candidates than M yields a shorter list.
    """
    if not ranking:
        raise UsageError("select_context requires a non-empty ranking")
    scored = _scored_passages(index, query, ranking, config)
    m = config.num_passages
    if config.selector is Selector.FIRSTP:
        pool = [(rank, p) for rank, p in scored if p.window_index == 0]
        return _top_m(pool, m)
    if config.selector is Selector.TOPP:
        return _top_m(scored, m)
    if config.selector is Selector.MAXP:
        best: dict[str, tuple[int, Passage]] = {}
        for rank, passage in scored:
            cur = best.get(passage.doc_id)
            if cur is None or (-passage.score, rank, passage.window_index) < (
                -cur[1].score,
                cur[0],
                cur[1].window_index,
            ):
                best[passage.doc_id] = (rank, passage)
        return _top_m(list(best.values()), m)
    raise ConfigurationError(f"unknown selector: {config.selector}")
