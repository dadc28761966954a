from collections import Counter

import pytest
from hypothesis import given, strategies as st

from ontolearn.corpus import (CorpusStats, Verbatim, build_stats, cooccurring_unigrams, extract_ngrams,
                              read_corpus, tokenize, write_corpus)


def norms(text):
    return [t.norm for t in tokenize(text)]


def test_tokenize_examples():
    assert norms("c/s service airbag light on.") == ["c/s", "service", "airbag", "light", "on"]
    assert norms("") == []
    assert norms("  ENGINE   stall!! ") == ["engine", "stall"]


def test_tokenize_keeps_internal_joiners_and_numbers():
    assert norms("R&R the a-pillar, code 100 (3.5 v)") == ["r&r", "the", "a-pillar", "code", "100", "3.5", "v"]


def test_token_positions_contiguous():
    toks = tokenize("one two, three")
    assert [t.position for t in toks] == [0, 1, 2]
    assert [t.surface for t in toks] == ["one", "two", "three"]


def test_extract_ngrams_examples():
    v = Verbatim.from_text("v", "a b c")
    assert sorted(c.phrase for c in extract_ngrams(v, 2)) == ["a", "a b", "b", "b c", "c"]
    assert [c.phrase for c in extract_ngrams(Verbatim.from_text("v", "a"), 4)] == ["a"]
    v = Verbatim.from_text("v", "a b. c")
    assert "b c" not in {c.phrase for c in extract_ngrams(v, 2)}


def test_extract_ngrams_rejects_bad_max_n():
    with pytest.raises(ValueError):
        extract_ngrams(Verbatim.from_text("v", "a"), 5)


def test_semicolon_is_a_boundary():
    v = Verbatim.from_text("v", "fuel pump; relay")
    assert v.boundaries == {1}
    assert v.crosses_boundary(1, 2)


def test_build_stats_examples():
    corpus = [Verbatim.from_text("1", "fuel pump noise"), Verbatim.from_text("2", "replaced fuel pump"),
              Verbatim.from_text("3", "pump pump")]
    s = build_stats(corpus)
    assert s.tf("fuel pump") == 2 and s.df("fuel pump") == 2
    assert s.tf("pump") == 4 and s.df("pump") == 3
    assert s.total_docs == 3
    with pytest.raises(ValueError):
        build_stats([])


def test_cooccurring_unigrams_examples():
    assert cooccurring_unigrams([Verbatim.from_text("1", "tps sensor fault")], "tps") == {"sensor", "fault"}
    assert cooccurring_unigrams([Verbatim.from_text("1", "a b")], "zzz") == set()
    corpus = [Verbatim.from_text("1", "a b"), Verbatim.from_text("2", "a c")]
    assert cooccurring_unigrams(corpus, "a") == {"b", "c"}


def test_corpus_file_roundtrip(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("x1\tFuel pump noisy. Replaced\nno id line\n\n", encoding="utf-8")
    corpus = read_corpus(p)
    assert [v.id for v in corpus] == ["x1", "line-2"]
    write_corpus(tmp_path / "out.tsv", corpus)
    again = read_corpus(tmp_path / "out.tsv")
    assert [v.norms for v in again] == [v.norms for v in corpus]
    assert [v.boundaries for v in again] == [v.boundaries for v in corpus]


def test_stats_dump(tmp_path):
    s = build_stats([Verbatim.from_text("1", "a a b")], max_n=1)
    s.dump(tmp_path / "s.tsv")
    assert (tmp_path / "s.tsv").read_text().splitlines() == ["a\t2\t1", "b\t1\t1"]


words = st.text(alphabet="abcxyz/-&019", min_size=1, max_size=6)
raw_texts = st.lists(st.one_of(words, st.sampled_from([".", ",", ";", "!", "  ", "--"])), max_size=15).map(" ".join)


@given(raw_texts)
def test_tokenize_idempotent(text):
    first = norms(text)
    assert norms(" ".join(first)) == first
    assert all(w and " " not in w for w in first)


@given(raw_texts, st.integers(1, 4))
def test_ngram_count_formula(text, max_n):
    v = Verbatim.from_text("v", text)
    expected = sum(max(0, (e - s) - n + 1) for s, e in v.segments() for n in range(1, max_n + 1))
    spans = extract_ngrams(v, max_n)
    assert len(spans) == expected
    for c in spans:
        assert c.phrase == " ".join(v.norms[c.start:c.end])
        assert not v.crosses_boundary(c.start, c.n)


@given(st.lists(raw_texts, min_size=1, max_size=5), st.lists(raw_texts, min_size=1, max_size=5))
def test_stats_additive(a, b):
    ca = [Verbatim.from_text(f"a{i}", t) for i, t in enumerate(a)]
    cb = [Verbatim.from_text(f"b{i}", t) for i, t in enumerate(b)]
    joint = build_stats(ca + cb)
    summed = build_stats(ca) + build_stats(cb)
    assert joint.term_freq == summed.term_freq
    assert joint.doc_freq == summed.doc_freq
    assert joint.total_docs == summed.total_docs
    for p, df in joint.doc_freq.items():
        assert 1 <= df <= joint.total_docs and df <= joint.term_freq[p]
