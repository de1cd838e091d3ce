"""Inverted index construction and BM25 ranked retrieval.

The index is immutable once built and safe to share across threads;
searches are pure reads. Document ids tie-break ascending wherever
scores are equal, so runs are reproducible byte for byte.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .analysis import AnalysisConfig, analyze
from .errors import ConfigurationError, IngestionError, ProtocolError

INDEX_MAGIC = b"QRFMIDX\x00"
INDEX_VERSION = 1

DEFAULT_DEPTH = 1000


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ConfigurationError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigurationError(f"b must be in [0,1], got {self.b}")


# values searched when tuning BM25 against a validation query set
TUNING_GRID_K1 = (0.6, 0.9, 1.2, 1.5, 2.0)
TUNING_GRID_B = (0.3, 0.5, 0.75, 0.9)


@dataclass(frozen=True)
class WeightedQuery:
    """A term -> non-negative weight map; the query representation used
    everywhere downstream of analysis.

    Zero-weight entries are dropped at construction and terms are kept in
    sorted order, so score accumulation order is deterministic.
    """

    weights: dict[str, float]
    source_text: str = ""
    feedback_applied: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        cleaned = {}
        for term, w in sorted(self.weights.items()):
            if w < 0:
                raise ConfigurationError(f"negative weight for term {term!r}: {w}")
            if w != 0.0:
                cleaned[term] = float(w)
        object.__setattr__(self, "weights", cleaned)

    @classmethod
    def from_text(cls, text: str, config: AnalysisConfig) -> "WeightedQuery":
        weights: dict[str, float] = {}
        for term in analyze(text, config):
            weights[term] = weights.get(term, 0.0) + 1.0
        return cls(weights=weights, source_text=text)

    def scaled(self, factor: float) -> "WeightedQuery":
        return WeightedQuery(
            {t: w * factor for t, w in self.weights.items()},
            source_text=self.source_text,
            feedback_applied=self.feedback_applied,
        )

    def normalized(self) -> "WeightedQuery":
        total = sum(self.weights.values())
        if total == 0:
            return self
        return self.scaled(1.0 / total)

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class Ranking:
    """Ordered (doc id, score) list for one query, best first."""

    query_id: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for doc_id, _ in self.entries:
            if doc_id in seen:
                raise ConfigurationError(f"duplicate doc id in ranking: {doc_id}")
            seen.add(doc_id)

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def top(self, k: int) -> "Ranking":
        return Ranking(self.query_id, self.entries[:k])

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)


class Index:
    """Inverted index plus the statistics BM25 needs.

    postings map term -> [(doc id, term frequency)]; doc_store keeps the
    raw text for passage extraction. The analysis config used at build
    time travels with the index so query analysis always matches.
    """

    def __init__(
        self,
        postings: dict[str, list[tuple[str, int]]],
        doc_lengths: dict[str, int],
        doc_store: dict[str, str],
        analysis: AnalysisConfig,
    ):
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.doc_store = doc_store
        self.analysis = analysis
        self.doc_count = len(doc_lengths)
        total = sum(doc_lengths.values())
        self.total_tokens = total
        self.avg_doc_length = total / self.doc_count if self.doc_count else 0.0
        self.collection_freq = {t: sum(tf for _, tf in ps) for t, ps in postings.items()}
        self._avg_passage_length: dict[tuple[int, int], float] = {}

    def doc_freq(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def avg_passage_length(self, window: int, stride: int) -> float:
        """Mean analyzed-token length over all sliding-window passages."""
        key = (window, stride)
        if key not in self._avg_passage_length:
            from .passages import split_passages

            total = 0
            count = 0
            for text in self.doc_store.values():
                for passage in split_passages("", text, window, stride):
                    total += len(analyze(passage.text, self.analysis))
                    count += 1
            self._avg_passage_length[key] = total / count if count else 0.0
        return self._avg_passage_length[key]


def build_index(corpus: Iterable[tuple[str, str]], config: AnalysisConfig) -> Index:
    """Build an index from (doc id, text) records.

    Raises IngestionError on a duplicate doc id or an empty corpus.
    """
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    doc_store: dict[str, str] = {}
    for doc_id, text in corpus:
        if doc_id in doc_lengths:
            raise IngestionError(f"duplicate doc id: {doc_id}")
        terms = analyze(text, config)
        doc_lengths[doc_id] = len(terms)
        doc_store[doc_id] = text
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        for t, tf in counts.items():
            postings.setdefault(t, []).append((doc_id, tf))
    if not doc_lengths:
        raise IngestionError("empty corpus")
    return Index(postings, doc_lengths, doc_store, config)


def idf(index: Index, term: str) -> float:
    """Non-negative BM25 idf: ln((N - n + 0.5) / (n + 0.5) + 1)."""
    n = index.doc_freq(term)
    return max(0.0, math.log((index.doc_count - n + 0.5) / (n + 0.5) + 1.0))


def _tf_component(tf: int, length: int, avg_length: float, params: Bm25Params) -> float:
    if avg_length == 0:
        return 0.0
    norm = params.k1 * (1.0 - params.b + params.b * length / avg_length)
    return tf * (params.k1 + 1.0) / (tf + norm)


def search(
    index: Index,
    query: WeightedQuery,
    k: int,
    params: Bm25Params = Bm25Params(),
) -> Ranking:
    """Top-k documents by the weighted BM25 sum; zero-score docs excluded."""
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    scores: dict[str, float] = {}
    for term, weight in query.weights.items():
        plist = index.postings.get(term)
        if not plist:
            continue
        term_idf = idf(index, term)
        for doc_id, tf in plist:
            contrib = weight * term_idf * _tf_component(
                tf, index.doc_lengths[doc_id], index.avg_doc_length, params
            )
            scores[doc_id] = scores.get(doc_id, 0.0) + contrib
    ranked = sorted(
        ((d, s) for d, s in scores.items() if s != 0.0),
        key=lambda item: (-item[1], item[0]),
    )
    return Ranking(query_id=query.source_text, entries=ranked[:k])


def score_passage(
    query: WeightedQuery,
    passage,
    index: Index,
    avg_len: float | None = None,
    params: Bm25Params = Bm25Params(),
) -> float:
    """BM25 score of a passage treated as a document.

    Document frequencies come from the corpus index; the length
    normalization compares the passage's analyzed length to the corpus
    average passage length (computed for the default window geometry
    unless avg_len is supplied by the caller).
    """
    terms = analyze(passage.text, index.analysis)
    if avg_len is None:
        avg_len = index.avg_passage_length(128, 64)
    counts: dict[str, int] = {}
    for t in terms:
        counts[t] = counts.get(t, 0) + 1
    score = 0.0
    for term, weight in query.weights.items():
        tf = counts.get(term)
        if not tf:
            continue
        score += weight * idf(index, term) * _tf_component(tf, len(terms), avg_len, params)
    return score


def rerank_maxpassage(
    ranking: Ranking,
    query_text: str,
    scorer,
    index: Index,
    window: int = 128,
    stride: int = 64,
) -> Ranking:
    """Re-score each candidate by the max external-scorer score over its
    passages, then re-sort. The candidate set is preserved exactly.

    The scorer exposes score(query, passage_text) -> float. Transport
    failures propagate before any result is produced, leaving the
    caller's ranking untouched.
    """
    from .passages import split_passages

    rescored = []
    for doc_id, _ in ranking.entries:
        if doc_id not in index.doc_store:
            raise ConfigurationError(f"doc id not in index doc store: {doc_id}")
        passages = split_passages(doc_id, index.doc_store[doc_id], window, stride)
        best = float("-inf")
        for passage in passages:
            value = float(scorer.score(query_text, passage.text))
            if not math.isfinite(value):
                raise ProtocolError(
                    f"scorer returned non-finite score {value!r} for doc {doc_id}"
                )
            best = max(best, value)
        if not passages:
            best = 0.0
        rescored.append((doc_id, best))
    rescored.sort(key=lambda item: (-item[1], item[0]))
    return Ranking(query_id=ranking.query_id, entries=rescored)


def save_index(index: Index, path: str | Path) -> None:
    """Persist to a single versioned binary file (magic, little-endian
    version word, zlib-compressed JSON payload with the analysis config)."""
    payload = {
        "analysis": {
            "stem": index.analysis.stem,
            "stopwords": sorted(index.analysis.stopwords),
            "lowercase": index.analysis.lowercase,
        },
        "postings": {t: [[d, tf] for d, tf in ps] for t, ps in index.postings.items()},
        "doc_lengths": index.doc_lengths,
        "doc_store": index.doc_store,
    }
    blob = zlib.compress(json.dumps(payload).encode("utf-8"))
    with open(path, "wb") as f:
        f.write(INDEX_MAGIC)
        f.write(struct.pack("<I", INDEX_VERSION))
        f.write(blob)


def load_index(path: str | Path) -> Index:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"index file not found: {path}")
    raw = path.read_bytes()
    if raw[: len(INDEX_MAGIC)] != INDEX_MAGIC:
        raise ConfigurationError(f"not an index file: {path}")
    (version,) = struct.unpack_from("<I", raw, len(INDEX_MAGIC))
    if version != INDEX_VERSION:
        raise ConfigurationError(
            f"index format version {version} unsupported (expected {INDEX_VERSION})"
        )
    payload = json.loads(zlib.decompress(raw[len(INDEX_MAGIC) + 4 :]))
    config = AnalysisConfig(
        stem=payload["analysis"]["stem"],
        stopwords=frozenset(payload["analysis"]["stopwords"]),
        lowercase=payload["analysis"]["lowercase"],
    )
    postings = {t: [(d, tf) for d, tf in ps] for t, ps in payload["postings"].items()}
    return Index(postings, payload["doc_lengths"], payload["doc_store"], config)


def iter_corpus(path: str | Path) -> Iterator[tuple[str, str]]:
    """Read line-delimited corpus records: two-column TSV (docno, text) or
    one JSON object per line with docno/text fields."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"corpus file not found: {path}")
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("{"):
                record = json.loads(line)
                try:
                    yield str(record["docno"]), str(record["text"])
                except KeyError as e:
                    raise IngestionError(
                        f"{path}:{lineno}: record missing field {e}"
                    ) from None
            else:
                parts = line.split("\t", 1)
                if len(parts) != 2:
                    raise IngestionError(
                        f"{path}:{lineno}: expected two tab-separated columns"
                    )
                yield parts[0], parts[1]
