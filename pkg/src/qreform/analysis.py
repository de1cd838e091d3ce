"""Text analysis: tokenization, stopword removal, stemming.

One analysis convention is shared by indexing, querying, passage scoring
and the training-pair stopword filter, so that query-time terms always
line up with index-time terms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import porter
from .errors import ConfigurationError

_TOKEN_RE = re.compile(r"[0-9a-z]+")

BUNDLED_STOPWORDS = "stopwords.txt"


def load_stopword_list(path: str | Path) -> frozenset[str]:
    """Load a one-word-per-line UTF-8 stopword file into a lowercase set.

    Blank lines are ignored; duplicates collapse after case folding.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"stopword file not found: {path}")
    words = {
        line.strip().lower()
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    }
    if not words:
        raise ConfigurationError(f"stopword file is empty: {path}")
    return frozenset(words)


def bundled_stopwords() -> frozenset[str]:
    """The stopword list shipped with the package (733 words)."""
    ref = resources.files("qreform").joinpath("data", BUNDLED_STOPWORDS)
    with resources.as_file(ref) as path:
        return load_stopword_list(path)


@dataclass(frozen=True)
class AnalysisConfig:
    """How raw text becomes index terms. Analysis is pure in (text, config)."""

    stem: bool = True
    stopwords: frozenset[str] = field(default_factory=frozenset)
    lowercase: bool = True  # kept for the record; analysis always lowercases

    @classmethod
    def default(cls) -> "AnalysisConfig":
        return cls(stem=True, stopwords=bundled_stopwords())


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


def analyze(text: str, config: AnalysisConfig) -> list[str]:
    """Tokenize, drop stopwords (on surface forms, before stemming), stem.

    Order of surviving tokens is preserved. Tokens containing digits are
    never stemmed.
    """
    terms = []
    for token in tokenize(text):
        if token in config.stopwords:
            continue
        if config.stem and token.isalpha():
            token = porter.stem(token)
        terms.append(token)
    return terms
