"""Verbatim corpora: tokenization, n-gram spans and frequency statistics."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .fileio import atomic_open

MAX_N = 4

# A token is a run of word characters, optionally joined by '/', '-', '&'
# (c/s, a-pillar, r&r) or by '.' between digits (3.5).
_TOKEN_RE = re.compile(r"\w+(?:(?:[/&\-]|(?<=\d)\.(?=\d))\w+)*")
_SENTENCE_END = re.compile(r"[.;!?]")


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    position: int


@dataclass(frozen=True)
class Verbatim:
    id: str
    raw_text: str
    tokens: tuple[Token, ...]
    # indices i such that a sentence break follows token i
    boundaries: frozenset[int] = frozenset()

    @classmethod
    def from_text(cls, id: str, raw_text: str) -> "Verbatim":
        tokens, boundaries = tokenize_with_boundaries(raw_text)
        return cls(id, raw_text, tuple(tokens), frozenset(boundaries))

    @classmethod
    def from_norms(cls, id: str, norms: Sequence[str], boundaries: Iterable[int] = ()) -> "Verbatim":
        boundaries = frozenset(b for b in boundaries if 0 <= b < len(norms))
        text = render(norms, boundaries)
        return cls.from_text(id, text)

    @property
    def norms(self) -> list[str]:
        return [t.norm for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)

    def segments(self) -> list[tuple[int, int]]:
        """Boundary-free half-open token ranges."""
        out = []
        start = 0
        for i in range(len(self.tokens)):
            if i in self.boundaries:
                out.append((start, i + 1))
                start = i + 1
        if start < len(self.tokens):
            out.append((start, len(self.tokens)))
        return out

    def crosses_boundary(self, start: int, n: int) -> bool:
        return any(b in self.boundaries for b in range(start, start + n - 1))

    def text(self) -> str:
        return render(self.norms, self.boundaries)


@dataclass(frozen=True)
class Collocate:
    verbatim_id: str
    start: int
    n: int
    phrase: str

    @property
    def end(self) -> int:
        return self.start + self.n

    def overlaps(self, start: int, end: int) -> bool:
        return self.start < end and start < self.end


@dataclass
class CorpusStats:
    term_freq: Counter = field(default_factory=Counter)
    doc_freq: Counter = field(default_factory=Counter)
    total_docs: int = 0

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            self.term_freq + other.term_freq,
            self.doc_freq + other.doc_freq,
            self.total_docs + other.total_docs,
        )

    def tf(self, phrase: str) -> int:
        return self.term_freq.get(phrase, 0)

    def df(self, phrase: str) -> int:
        return self.doc_freq.get(phrase, 0)

    def dump(self, path) -> None:
        with atomic_open(path) as fh:
            for phrase in sorted(self.term_freq):
                fh.write(f"{phrase}\t{self.term_freq[phrase]}\t{self.doc_freq[phrase]}\n")


def tokenize_with_boundaries(raw_text: str) -> tuple[list[Token], list[int]]:
    tokens: list[Token] = []
    boundaries: list[int] = []
    last_end = 0
    for m in _TOKEN_RE.finditer(raw_text):
        if tokens and _SENTENCE_END.search(raw_text, last_end, m.start()):
            boundaries.append(len(tokens) - 1)
        surface = m.group(0)
        tokens.append(Token(surface, surface.lower(), len(tokens)))
        last_end = m.end()
    if tokens and _SENTENCE_END.search(raw_text, last_end):
        boundaries.append(len(tokens) - 1)
    return tokens, boundaries


def tokenize(raw_text: str) -> list[Token]:
    """Split a verbatim into tokens.

    Pieces are separated by whitespace and by any punctuation other than
    '/', '-' and '&' inside a word. Leading and trailing punctuation is
    dropped, norms are lowercased, digits are kept.

    >>> [t.norm for t in tokenize("c/s service airbag light on.")]
    ['c/s', 'service', 'airbag', 'light', 'on']
    """
    return tokenize_with_boundaries(raw_text)[0]


def render(norms: Sequence[str], boundaries: Iterable[int] = ()) -> str:
    boundaries = set(boundaries)
    parts = []
    for i, w in enumerate(norms):
        parts.append(w + " ." if i in boundaries else w)
    return " ".join(parts)


def extract_ngrams(verbatim: Verbatim, max_n: int = MAX_N) -> list[Collocate]:
    if not 1 <= max_n <= MAX_N:
        raise ValueError(f"max_n must be in 1..{MAX_N}, got {max_n}")
    norms = verbatim.norms
    out = []
    for seg_start, seg_end in verbatim.segments():
        for n in range(1, max_n + 1):
            for s in range(seg_start, seg_end - n + 1):
                out.append(Collocate(verbatim.id, s, n, " ".join(norms[s:s + n])))
    return out


def build_stats(corpus: Sequence[Verbatim], max_n: int = MAX_N) -> CorpusStats:
    if not corpus:
        raise ValueError("cannot build statistics of an empty corpus")
    tf: Counter = Counter()
    df: Counter = Counter()
    for v in corpus:
        phrases = [c.phrase for c in extract_ngrams(v, max_n)]
        tf.update(phrases)
        df.update(set(phrases))
    return CorpusStats(tf, df, len(corpus))


def phrase_positions(verbatim: Verbatim, phrase: str | Sequence[str]) -> list[int]:
    """Start indices where `phrase` occurs without crossing a sentence break."""
    ptoks = phrase.split() if isinstance(phrase, str) else list(phrase)
    if not ptoks:
        return []
    norms = verbatim.norms
    n = len(ptoks)
    out = []
    for s in range(len(norms) - n + 1):
        if norms[s:s + n] == ptoks and not verbatim.crosses_boundary(s, n):
            out.append(s)
    return out


def contains_phrase(verbatim: Verbatim, phrase: str | Sequence[str]) -> bool:
    ptoks = phrase.split() if isinstance(phrase, str) else list(phrase)
    if not ptoks or ptoks[0] not in verbatim.norms:
        return False
    return bool(phrase_positions(verbatim, ptoks))


def cooccurring_unigrams(corpus: Iterable[Verbatim], phrase: str) -> set[str]:
    ptoks = phrase.split()
    own = set(ptoks)
    out: set[str] = set()
    for v in corpus:
        if contains_phrase(v, ptoks):
            out.update(w for w in v.norms if w not in own)
    return out


def read_corpus(path) -> list[Verbatim]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" in line:
                vid, text = line.split("\t", 1)
            else:
                vid, text = f"line-{k}", line
            out.append(Verbatim.from_text(vid, text))
    return out


def write_corpus(path, corpus: Iterable[Verbatim], normalized: bool = True) -> None:
    with atomic_open(path) as fh:
        for v in corpus:
            text = v.text() if normalized else v.raw_text
            fh.write(f"{v.id}\t{text}\n")
