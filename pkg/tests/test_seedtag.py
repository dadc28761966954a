import itertools

import numpy as np
from hypothesis import given, settings, strategies as st

from ontolearn.corpus import Verbatim
from ontolearn.lexicon import SeedOntology
from ontolearn.seedtag import tag_seed_concepts


def spans(text, concepts):
    onto = SeedOntology({c: "A" for c in concepts})
    return [(s.start, s.n, s.phrase) for s in tag_seed_concepts(Verbatim.from_text("v", text), onto)]


def maximal_match_oracle(verbatim, onto):
    """Among all maximal sets of non-overlapping occurrences, the one that is
    lexicographically smallest in (start, -length) order."""
    norms = verbatim.norms
    occ = [(s, n) for n in range(1, 5) for s in range(len(norms) - n + 1)
           if " ".join(norms[s:s + n]) in onto and not verbatim.crosses_boundary(s, n)]
    best = None
    for r in range(len(occ) + 1):
        for subset in itertools.combinations(occ, r):
            ordered = sorted(subset)
            if any(a[0] + a[1] > b[0] for a, b in zip(ordered, ordered[1:])):
                continue
            free = [o for o in occ if o not in subset
                    and all(o[0] + o[1] <= s or s + n <= o[0] for s, n in subset)]
            if free:
                continue  # not maximal
            key = sorted((s, -n) for s, n in subset)
            if best is None or key < best:
                best = key
    return [(s, -m) for s, m in best]


def test_longest_match_examples():
    assert spans("the engine control module is replaced", ["engine control module", "engine"]) == [
        (1, 3, "engine control module")]
    assert spans("nothing here", ["engine"]) == []
    assert spans("fuel pump relay", ["fuel pump", "pump relay"]) == [(0, 2, "fuel pump")]


def test_spans_do_not_cross_boundaries():
    assert spans("fuel. pump", ["fuel pump", "pump"]) == [(1, 1, "pump")]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.sampled_from("abcd"), max_size=7),
       st.sets(st.lists(st.sampled_from("abcd"), min_size=1, max_size=3).map(" ".join), max_size=6),
       st.sets(st.integers(0, 6), max_size=2))
def test_matches_oracle(words, concepts, breaks):
    v = Verbatim.from_norms("v", words, breaks)
    onto = SeedOntology({c: "A" for c in concepts})
    got = [(s.start, s.n) for s in tag_seed_concepts(v, onto)]
    assert got == maximal_match_oracle(v, onto)
    for (s1, n1), (s2, n2) in zip(got, got[1:]):
        assert s1 + n1 <= s2
