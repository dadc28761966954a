"""Longest-match tagging of seed-ontology concepts inside a verbatim."""

from __future__ import annotations

from typing import NamedTuple

from .corpus import Verbatim
from .lexicon import SeedOntology


class ConceptSpan(NamedTuple):
    start: int
    n: int
    phrase: str
    type: str

    @property
    def end(self) -> int:
        return self.start + self.n


def tag_seed_concepts(verbatim: Verbatim, onto: SeedOntology, max_n: int = 4) -> list[ConceptSpan]:
    """Greedy leftmost-longest matching; matched tokens are consumed."""
    norms = verbatim.norms
    spans = []
    i = 0
    while i < len(norms):
        hit = None
        for n in range(min(max_n, len(norms) - i), 0, -1):
            if verbatim.crosses_boundary(i, n):
                continue
            phrase = " ".join(norms[i:i + n])
            t = onto.type_of(phrase)
            if t is not None:
                hit = ConceptSpan(i, n, phrase, t)
                break
        if hit is None:
            i += 1
        else:
            spans.append(hit)
            i += hit.n
    return spans
