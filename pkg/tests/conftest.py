from pathlib import Path

import pytest

from maldyn.behavior_log import load_corpus
from maldyn.synthetic import make_synthetic_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """The bundled 200-sample synthetic corpus (seed 42)."""
    return make_synthetic_corpus(tmp_path_factory.mktemp("corpus"), n_samples=200, seed=42)


@pytest.fixture(scope="session")
def corpus_logs(corpus):
    logs, errors = load_corpus(corpus)
    assert not errors
    return logs


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(tag, ok, detail)`` returns ``ok``."""

    def record(tag: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {tag}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
