import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

import pytest  # noqa: E402


@pytest.fixture(scope="session")
def corpus_dir():
    return ROOT / "corpus"


def load_corpus_test(name):
    from memodel.litmus import parse_litmus
    path = ROOT / "corpus" / f"{name}.litmus"
    return parse_litmus(path.read_text())
