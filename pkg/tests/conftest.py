import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qreform.analysis import AnalysisConfig
from qreform.retrieval import build_index

TESTS_DIR = Path(__file__).parent


@pytest.fixture(scope="session")
def plain_config():
    """No stemming, no stopwords: term surfaces stay readable in asserts."""
    return AnalysisConfig(stem=False, stopwords=frozenset())


ANIMAL_DOCS = [
    ("d1", "cats chase mice in the barn"),
    ("d2", "dogs chase cats around the yard"),
    ("d3", "mice eat grain in the barn loft"),
    ("d4", "the yard has a barn and a fence"),
    ("d5", "dogs and cats sleep all afternoon"),
]


@pytest.fixture(scope="session")
def animal_index(plain_config):
    return build_index(ANIMAL_DOCS, plain_config)
