from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "oj_corpus"

RANDOM_FUNCTION = """
void randomFunction() {
    bool flag = false;
    while (!flag) {
        if (rand() % 2 == 0) {
            flag = true;
        }
    }
}
"""


@pytest.fixture
def loop_source() -> str:
    return RANDOM_FUNCTION


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS
