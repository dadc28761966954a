"""External word lists: dictionary, seed ontology, abbreviations, senses, stop/noise words."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .corpus import tokenize

DEFAULT_TYPES = ("A", "B", "C")
DEFAULT_SENSE_CAP = 10


class LexiconError(ValueError):
    """A lexicon file is malformed or inconsistent."""


@dataclass(frozen=True)
class Dictionary:
    entries: frozenset[str] = frozenset()

    def __contains__(self, word: str) -> bool:
        return word in self.entries


@dataclass(frozen=True)
class SeedOntology:
    concepts: Mapping[str, str]
    types: tuple[str, ...] = DEFAULT_TYPES
    unigrams: frozenset[str] = field(init=False)

    def __post_init__(self):
        words = set()
        for phrase, t in self.concepts.items():
            if t not in self.types:
                raise LexiconError(f"concept {phrase!r} has unknown type {t!r}")
            words.update(phrase.split())
        object.__setattr__(self, "unigrams", frozenset(words))

    def __contains__(self, phrase: str) -> bool:
        return phrase in self.concepts

    def type_of(self, phrase: str) -> str | None:
        return self.concepts.get(phrase)

    @property
    def max_len(self) -> int:
        return max((len(p.split()) for p in self.concepts), default=0)


@dataclass(frozen=True)
class AbbreviationDict:
    expansions: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __contains__(self, abbr: str) -> bool:
        return abbr in self.expansions

    def get(self, abbr: str) -> tuple[str, ...]:
        return self.expansions.get(abbr, ())


@dataclass(frozen=True)
class SenseLexicon:
    sense_count: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class StopNoiseLists:
    stop_words: frozenset[str] = frozenset()
    noise_words: frozenset[str] = frozenset()

    def excluded(self, word: str) -> bool:
        return word in self.stop_words or word in self.noise_words


@dataclass(frozen=True)
class Lexicons:
    dictionary: Dictionary
    ontology: SeedOntology
    abbreviations: AbbreviationDict
    senses: SenseLexicon
    stopnoise: StopNoiseLists
    fingerprint: str = ""

    def is_correct(self, word: str) -> bool:
        return is_correct(word, self.dictionary, self.ontology)


@dataclass
class LexiconPaths:
    dictionary: str | Path | None = None
    ontology: str | Path | None = None
    abbreviations: str | Path | None = None
    senses: str | Path | None = None
    stop_words: str | Path | None = None
    noise_words: str | Path | None = None

    @classmethod
    def from_dir(cls, d: str | Path) -> "LexiconPaths":
        """Conventional file names inside one directory (as written by `synth`)."""
        d = Path(d)

        def opt(name):
            p = d / name
            return p if p.exists() else None

        return cls(
            dictionary=opt("dictionary.txt"),
            ontology=opt("ontology.tsv"),
            abbreviations=opt("abbreviations.tsv"),
            senses=opt("senses.tsv"),
            stop_words=opt("stopwords.txt"),
            noise_words=opt("noisewords.txt"),
        )


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if line.strip() and not line.startswith("#"):
                yield k, line


def _single_token(word: str, path, k: int) -> str:
    toks = tokenize(word)
    if len(toks) != 1:
        raise LexiconError(f"{path}:{k}: expected a single word, got {word!r}")
    return toks[0].norm


def _norm_phrase(phrase: str) -> str:
    return " ".join(t.norm for t in tokenize(phrase))


def load_wordlist(path) -> frozenset[str]:
    return frozenset(_single_token(line.strip(), path, k) for k, line in _lines(path))


def load_ontology(path, types: tuple[str, ...] | None = None) -> SeedOntology:
    concepts: dict[str, str] = {}
    seen_types: list[str] = []
    for k, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1].strip():
            raise LexiconError(f"{path}:{k}: expected '<phrase>\\t<type>'")
        phrase, t = _norm_phrase(parts[0]), parts[1].strip()
        n = len(phrase.split())
        if not 1 <= n <= 4:
            raise LexiconError(f"{path}:{k}: concept {parts[0]!r} must have 1-4 tokens")
        if phrase in concepts and concepts[phrase] != t:
            raise LexiconError(
                f"{path}:{k}: conflicting types for concept {phrase!r}: {concepts[phrase]} vs {t}")
        concepts[phrase] = t
        if t not in seen_types:
            seen_types.append(t)
    if types is None:
        types = tuple(DEFAULT_TYPES) + tuple(sorted(t for t in seen_types if t not in DEFAULT_TYPES))
    return SeedOntology(concepts, tuple(types))


def load_abbreviations(path) -> AbbreviationDict:
    out: dict[str, tuple[str, ...]] = {}
    for k, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconError(f"{path}:{k}: expected '<abbr>\\t<ff_1>|<ff_2>|...'")
        abbr = _single_token(parts[0], path, k)
        forms = []
        for ff in parts[1].split("|"):
            ff = _norm_phrase(ff)
            if not ff:
                raise LexiconError(f"{path}:{k}: empty full form")
            if ff not in forms:
                forms.append(ff)
        out[abbr] = tuple(forms)
    return AbbreviationDict(out)


def load_senses(path) -> SenseLexicon:
    out: dict[str, int] = {}
    for k, line in _lines(path):
        parts = line.split("\t")
        try:
            lemma, count = parts[0].strip().lower(), int(parts[1])
        except (IndexError, ValueError):
            raise LexiconError(f"{path}:{k}: expected '<lemma>\\t<count>'") from None
        if count < 1 or len(parts) != 2:
            raise LexiconError(f"{path}:{k}: sense count must be a positive integer")
        out[lemma] = count
    return SenseLexicon(out)


def _fingerprint(paths: LexiconPaths) -> str:
    h = hashlib.sha256()
    for name in ("dictionary", "ontology", "abbreviations", "senses", "stop_words", "noise_words"):
        p = getattr(paths, name)
        h.update(name.encode())
        if p is not None:
            h.update(Path(p).read_bytes())
    return h.hexdigest()[:16]


def load_lexicons(paths: LexiconPaths, types: tuple[str, ...] | None = None) -> Lexicons:
    return Lexicons(
        dictionary=Dictionary(load_wordlist(paths.dictionary) if paths.dictionary else frozenset()),
        ontology=load_ontology(paths.ontology, types) if paths.ontology else SeedOntology({}, types or DEFAULT_TYPES),
        abbreviations=load_abbreviations(paths.abbreviations) if paths.abbreviations else AbbreviationDict(),
        senses=load_senses(paths.senses) if paths.senses else SenseLexicon(),
        stopnoise=StopNoiseLists(
            load_wordlist(paths.stop_words) if paths.stop_words else frozenset(),
            load_wordlist(paths.noise_words) if paths.noise_words else frozenset(),
        ),
        fingerprint=_fingerprint(paths),
    )


def is_correct(word: str, dictionary: Dictionary, onto: SeedOntology) -> bool:
    return word in dictionary.entries or word in onto.unigrams


def sense_count_for(collocate: str, lex: SenseLexicon, cap: int = DEFAULT_SENSE_CAP) -> int:
    if cap < 1:
        raise ValueError("cap must be >= 1")
    words = collocate.split()
    if len(words) == 1:
        p = lex.sense_count.get(words[0], 1)
    else:
        p = lex.sense_count.get("_".join(words))
        if p is None:
            p = max(lex.sense_count.get(w, 1) for w in words)
    return min(max(p, 1), cap)
