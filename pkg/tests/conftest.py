import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
FIXTURES = TESTS_DIR / "fixtures"
LOGICAL_FIXTURES = sorted((FIXTURES / "logical").glob("*.tex"))
VISUAL_FIXTURES = sorted((FIXTURES / "visual").glob("*.tex"))
ARXIV_CACHE = FIXTURES / "arxiv_cache"

sys.path.insert(0, str(TESTS_DIR))

from logicaltex.converter import ConversionPolicy, Scope  # noqa: E402

# The five canonical degradation bundles used for round-trip verification:
# each one fixes a front-matter style, a marker alphabet, an abstract form
# and whether body constructs degrade too.
PROFILE_SETS = (
    ("centerline-style",),
    ("center-env",),
    ("centerline-style", "numbered-markers", "bold-solitary-sections"),
    ("center-env", "symbol-markers", "inline-emphasis"),
    ("centerline-style", "symbol-markers", "unlabeled-abstract",
     "bold-solitary-sections", "inline-emphasis"),
)

FULL_PROFILES = PROFILE_SETS[4]

AGGRESSIVE = ConversionPolicy(scope=Scope.FULL, aggressive=True)
METADATA_ONLY = ConversionPolicy(scope=Scope.METADATA_ONLY)


@pytest.fixture(scope="session")
def corpus100():
    from corpusgen import build_corpus

    return build_corpus(100)


@pytest.fixture(scope="session")
def small_corpus():
    from corpusgen import build_corpus

    return build_corpus(8)
