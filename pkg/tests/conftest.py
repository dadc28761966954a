import time
from contextlib import contextmanager

import numpy as np
import pytest

from ontolearn.embeddings import EmbeddingTable
from ontolearn.lexicon import (AbbreviationDict, Dictionary, Lexicons, SeedOntology, SenseLexicon,
                               StopNoiseLists)


def make_lexicons(words=(), concepts=None, abbreviations=None, stop=(), noise=(), senses=None, types=("A", "B", "C")):
    return Lexicons(
        dictionary=Dictionary(frozenset(words)),
        ontology=SeedOntology(dict(concepts or {}), tuple(types)),
        abbreviations=AbbreviationDict({k: tuple(v) for k, v in (abbreviations or {}).items()}),
        senses=SenseLexicon(dict(senses or {})),
        stopnoise=StopNoiseLists(frozenset(stop), frozenset(noise)),
    )


def make_table(vectors: dict) -> EmbeddingTable:
    words = list(vectors)
    m = np.array([vectors[w] for w in words], dtype=float)
    return EmbeddingTable(m.shape[1], words, m, min_count=1)


@pytest.fixture
def lexicons_factory():
    return make_lexicons


@pytest.fixture
def table_factory():
    return make_table


# acceptance criteria report one line each; collected here and printed after the run
ACCEPTANCE: list[str] = []


@contextmanager
def criterion(name: str, limit: float | None = None):
    """Time a criterion block and record PASS/FAIL (failures re-raise)."""
    info = {}
    t0 = time.perf_counter()
    try:
        yield info
        dt = time.perf_counter() - t0
        if limit is not None:
            assert dt < limit, f"took {dt:.1f}s, limit {limit:.0f}s"
    except BaseException as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        ACCEPTANCE.append(f"FAIL  {name}: {msg[:160]}")
        raise
    detail = info.get("detail", "")
    ACCEPTANCE.append(f"PASS  {name} ({dt:.1f}s){'  ' + detail if detail else ''}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
