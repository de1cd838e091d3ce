"""Sparse retrieval and query-reformulation experimentation toolkit."""

from .analysis import AnalysisConfig, analyze, bundled_stopwords, load_stopword_list
from .retrieval import (
    Bm25Params,
    Index,
    Ranking,
    WeightedQuery,
    build_index,
    search,
)

__all__ = [
    "AnalysisConfig",
    "analyze",
    "bundled_stopwords",
    "load_stopword_list",
    "Bm25Params",
    "Index",
    "Ranking",
    "WeightedQuery",
    "build_index",
    "search",
]
