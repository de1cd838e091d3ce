"""TREC exchange formats: topics, qrels, and 6-column run files."""

from __future__ import annotations

from pathlib import Path

from .errors import IngestionError
from .evaluation import Qrels
from .retrieval import Ranking


def load_topics(path: str | Path) -> dict[str, str]:
    """Two-column TSV: query id, query text. Order of the file is kept."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"topics file not found: {path}")
    topics: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise IngestionError(f"{path}:{lineno}: expected 2 TSV columns")
            qid, text = parts
            if qid in topics:
                raise IngestionError(f"{path}:{lineno}: duplicate query id {qid}")
            topics[qid] = text
    if not topics:
        raise IngestionError(f"topics file is empty: {path}")
    return topics


def load_qrels(path: str | Path) -> Qrels:
    """Standard 4-column TREC qrels: qid, iteration, docno, grade."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"qrels file not found: {path}")
    judgments: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise IngestionError(f"{path}:{lineno}: expected 4 columns")
            qid, _, docno, grade = parts
            key = (qid, docno)
            if key in judgments:
                raise IngestionError(
                    f"{path}:{lineno}: duplicate judgment for ({qid}, {docno})"
                )
            try:
                judgments[key] = int(grade)
            except ValueError:
                raise IngestionError(
                    f"{path}:{lineno}: non-integer grade {grade!r}"
                ) from None
    return Qrels(judgments)


def write_run(rankings: dict[str, Ranking], tag: str, path: str | Path) -> None:
    """Emit a 6-column TREC run file, queries in dict order, ranks from 1."""
    with open(path, "w", encoding="utf-8") as f:
        for qid, ranking in rankings.items():
            for rank, (doc_id, score) in enumerate(ranking.entries, start=1):
                f.write(f"{qid} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


def load_run(path: str | Path) -> dict[str, Ranking]:
    """Parse a run file back into per-query rankings (file order preserved)."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"run file not found: {path}")
    per_query: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise IngestionError(f"{path}:{lineno}: expected 6 columns")
            qid, _, docno, _, score, _ = parts
            per_query.setdefault(qid, []).append((docno, float(score)))
    return {qid: Ranking(qid, entries) for qid, entries in per_query.items()}


def validate_run_file(path: str | Path) -> None:
    """Strict TREC run check: 6 columns everywhere, ranks contiguous from 1
    per query, scores non-increasing per query. Raises IngestionError."""
    path = Path(path)
    expected_rank: dict[str, int] = {}
    last_score: dict[str, float] = {}
    seen_docs: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise IngestionError(f"{path}:{lineno}: expected 6 columns")
            qid, _, docno, rank_str, score_str, _ = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError:
                raise IngestionError(
                    f"{path}:{lineno}: bad rank or score field"
                ) from None
            expected = expected_rank.get(qid, 0) + 1
            if rank != expected:
                raise IngestionError(
                    f"{path}:{lineno}: rank {rank} for {qid}, expected {expected}"
                )
            expected_rank[qid] = rank
            if qid in last_score and score > last_score[qid]:
                raise IngestionError(
                    f"{path}:{lineno}: score {score} increases within query {qid}"
                )
            last_score[qid] = score
            docs = seen_docs.setdefault(qid, set())
            if docno in docs:
                raise IngestionError(
                    f"{path}:{lineno}: duplicate doc {docno} for query {qid}"
                )
            docs.add(docno)
