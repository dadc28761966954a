"""Per-collocate feature vectors.

Families: part-of-speech one-hots (collocate, three neighbours each side,
nearest seed concept each side), averaged word2vec, context vector,
polysemy centroid and seed-ontology membership.
"""

from __future__ import annotations

import hashlib
import json
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Verbatim, phrase_positions
from .embeddings import EmbeddingTable
from .fileio import atomic_open
from .lexicon import DEFAULT_SENSE_CAP, SeedOntology, SenseLexicon, sense_count_for
from .seedtag import ConceptSpan, tag_seed_concepts

TAGSET = ("NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", "X", "PUNCT", "NONE")
TAG_INDEX = {t: i for i, t in enumerate(TAGSET)}
N_TAGS = len(TAGSET)

FAMILIES = (
    "pos",
    "left3_pos",
    "right3_pos",
    "left_concept_pos",
    "right_concept_pos",
    "word2vec",
    "context",
    "polysemy",
    "ontology",
)

CONTEXT_SIZE = 3
POLYSEMY_MIN_FREQ = 20
POLYSEMY_SAMPLE_CAP = 1000

# Penn Treebank -> coarse tags, for externally produced tag files.
PENN_TO_COARSE = {
    "NN": "NOUN", "NNS": "NOUN", "NNP": "NOUN", "NNPS": "NOUN",
    "VB": "VERB", "VBD": "VERB", "VBG": "VERB", "VBN": "VERB", "VBP": "VERB", "VBZ": "VERB", "MD": "VERB",
    "JJ": "ADJ", "JJR": "ADJ", "JJS": "ADJ",
    "RB": "ADV", "RBR": "ADV", "RBS": "ADV", "WRB": "ADV",
    "PRP": "PRON", "PRP$": "PRON", "WP": "PRON", "WP$": "PRON", "EX": "PRON",
    "DT": "DET", "PDT": "DET", "WDT": "DET",
    "IN": "ADP",
    "CD": "NUM",
    "CC": "CONJ",
    "RP": "PRT", "TO": "PRT", "POS": "PRT",
    "FW": "X", "SYM": "X", "LS": "X", "UH": "X",
    ".": "PUNCT", ",": "PUNCT", ":": "PUNCT", "``": "PUNCT", "''": "PUNCT",
    "-LRB-": "PUNCT", "-RRB-": "PUNCT", "#": "PUNCT", "$": "PUNCT",
}

_BUILTIN_LEXICON = {
    **dict.fromkeys("the a an this that these those each every some any no".split(), "DET"),
    **dict.fromkeys("i you he she it we they me him her us them my your his its our their".split(), "PRON"),
    **dict.fromkeys("in on at to for of with by from as into over under after before about "
                    "between through during per via".split(), "ADP"),
    **dict.fromkeys("and or but nor so yet".split(), "CONJ"),
    **dict.fromkeys("is are was were be been being has have had do does did will would can could "
                    "should may might must".split(), "VERB"),
    **dict.fromkeys("not up out off".split(), "PRT"),
    **dict.fromkeys("very also again still then now".split(), "ADV"),
}

_NUMERIC = re.compile(r"\d+(?:[.,/]\d+)*")


class FeatureError(ValueError):
    pass


class BaselineTagger:
    """Most-frequent-tag lexicon backed by suffix rules.

    Lookup order: lexicon, numeric -> NUM, "-ed" -> VERB, "-ly" -> ADV,
    otherwise NOUN.
    """

    def __init__(self, lexicon: Mapping[str, str] | None = None):
        self.lexicon = dict(_BUILTIN_LEXICON)
        if lexicon:
            self.lexicon.update(lexicon)

    def tag_word(self, w: str) -> str:
        t = self.lexicon.get(w)
        if t is not None:
            return t
        if _NUMERIC.fullmatch(w):
            return "NUM"
        if w.endswith("ed") and len(w) > 3:
            return "VERB"
        if w.endswith("ly") and len(w) > 3:
            return "ADV"
        return "NOUN"

    def __call__(self, verbatim: Verbatim) -> list[str]:
        return [self.tag_word(w) for w in verbatim.norms]

    @classmethod
    def from_file(cls, path) -> "BaselineTagger":
        lex = {}
        with open(path, encoding="utf-8") as fh:
            for k, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise FeatureError(f"{path}:{k}: expected '<word>\\t<tag>'")
                lex[parts[0].lower()] = coarse_tag(parts[1])
        return cls(lex)


class ExternalTagger:
    """Tags read from a file of `<verbatim_id>\\t<tag_1> <tag_2> ...` lines."""

    def __init__(self, tags: Mapping[str, list[str]], fallback: Callable[[Verbatim], list[str]] | None = None):
        self.tags = dict(tags)
        self.fallback = fallback

    @classmethod
    def from_file(cls, path, fallback=None) -> "ExternalTagger":
        tags = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                vid, _, rest = line.rstrip("\n").partition("\t")
                tags[vid] = [coarse_tag(t) for t in rest.split()]
        return cls(tags, fallback)

    def __call__(self, verbatim: Verbatim) -> list[str]:
        tags = self.tags.get(verbatim.id)
        if tags is None:
            if self.fallback is None:
                raise FeatureError(f"no tags for verbatim {verbatim.id}")
            return self.fallback(verbatim)
        if len(tags) != len(verbatim):
            raise FeatureError(
                f"tag count mismatch for verbatim {verbatim.id}: {len(tags)} tags, {len(verbatim)} tokens")
        return tags


def coarse_tag(tag: str) -> str:
    if tag in TAG_INDEX:
        return tag
    return PENN_TO_COARSE.get(tag, "X")


def pos_tag(verbatim: Verbatim, tagger: Callable[[Verbatim], list[str]] | None = None) -> list[str]:
    return (tagger or BaselineTagger())(verbatim)


@dataclass(frozen=True)
class FeatureSchema:
    n: int
    dim: int
    families: tuple[str, ...] = FAMILIES

    def __post_init__(self):
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise FeatureError(f"unknown feature families: {sorted(unknown)}")
        # canonical order regardless of how families were listed
        object.__setattr__(self, "families", tuple(f for f in FAMILIES if f in self.families))

    def width_of(self, family: str) -> int:
        return {
            "pos": self.n * N_TAGS,
            "left3_pos": CONTEXT_SIZE * N_TAGS,
            "right3_pos": CONTEXT_SIZE * N_TAGS,
            "left_concept_pos": N_TAGS,
            "right_concept_pos": N_TAGS,
            "word2vec": self.dim,
            "context": 2 * self.dim,
            "polysemy": 2 * self.dim,
            "ontology": self.n,
        }[family]

    @property
    def blocks(self) -> list[tuple[str, int, int]]:
        out, offset = [], 0
        for f in self.families:
            w = self.width_of(f)
            out.append((f, offset, w))
            offset += w
        return out

    @property
    def width(self) -> int:
        return sum(self.width_of(f) for f in self.families)

    def columns(self, family: str) -> slice:
        for f, off, w in self.blocks:
            if f == family:
                return slice(off, off + w)
        raise KeyError(family)

    def without(self, *families: str) -> "FeatureSchema":
        return FeatureSchema(self.n, self.dim, tuple(f for f in self.families if f not in families))

    def to_dict(self) -> dict:
        return {"n": self.n, "dim": self.dim, "families": list(self.families),
                "blocks": [[f, o, w] for f, o, w in self.blocks]}

    @classmethod
    def from_dict(cls, d) -> "FeatureSchema":
        return cls(int(d["n"]), int(d["dim"]), tuple(d["families"]))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _one_hot(tags: Sequence[str]) -> np.ndarray:
    out = np.zeros(len(tags) * N_TAGS)
    for i, t in enumerate(tags):
        out[i * N_TAGS + TAG_INDEX[t]] = 1.0
    return out


def linguistic_features(start: int, n: int, tags: Sequence[str],
                        concept_spans: Sequence[ConceptSpan]) -> dict[str, np.ndarray]:
    end = start + n
    # text order on both sides, NONE where the verbatim ends
    left = [tags[i] if i >= 0 else "NONE" for i in range(start - CONTEXT_SIZE, start)]
    right = [tags[i] if i < len(tags) else "NONE" for i in range(end, end + CONTEXT_SIZE)]
    lc = [s for s in concept_spans if s.end <= start]
    rc = [s for s in concept_spans if s.start >= end]
    left_concept = tags[max(lc, key=lambda s: s.end).start] if lc else "NONE"
    right_concept = tags[min(rc, key=lambda s: s.start).start] if rc else "NONE"
    return {
        "pos": _one_hot(tags[start:end]),
        "left3_pos": _one_hot(left),
        "right3_pos": _one_hot(right),
        "left_concept_pos": _one_hot([left_concept]),
        "right_concept_pos": _one_hot([right_concept]),
    }


def context_feature(start: int, n: int, norms: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    d = table.dim
    left = norms[max(0, start - CONTEXT_SIZE):start]
    right = norms[start + n:start + n + CONTEXT_SIZE]
    out = np.zeros(2 * d)
    if left:
        out[:d] = np.mean([table.lookup(w) for w in left], axis=0)
    if right:
        out[d:] = np.mean([table.lookup(w) for w in right], axis=0)
    return out


def ontology_feature(phrase: str, onto: SeedOntology) -> np.ndarray:
    return np.array([1.0 if w in onto.unigrams else 0.0 for w in phrase.split()])


def _sse(X, centroids, labels):
    return float(((X - centroids[labels]) ** 2).sum())


def kmeans(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding.

    Returns (centroids, labels, objective history). `k` is lowered to the
    number of distinct rows. Iteration stops when assignments no longer
    change.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("cannot cluster zero vectors")
    k = max(1, min(k, len(np.unique(X, axis=0))))

    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(len(X))]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
        idx = min(idx, len(X) - 1)
        while d2[idx] == 0:  # float edge: never reseed on an existing centroid
            idx = (idx + 1) % len(X)
        centroids[j] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1))

    def assign(c):
        dist = ((X[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
        return dist.argmin(axis=1)

    labels = assign(centroids)
    history = [_sse(X, centroids, labels)]
    for _ in range(max_iter):
        for j in range(k):
            members = X[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        history.append(_sse(X, centroids, labels))
        new_labels = assign(centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        history.append(_sse(X, centroids, labels))
    return centroids, labels, history


def _phrase_seed(phrase: str, seed: int) -> int:
    return (zlib.crc32(phrase.encode("utf-8")) ^ (seed * 0x9E3779B1)) & 0xFFFFFFFF


@dataclass
class PolysemyModel:
    centroids: dict[str, np.ndarray] = field(default_factory=dict)
    sample_cap: int = POLYSEMY_SAMPLE_CAP

    def save(self, path) -> None:
        with atomic_open(path) as fh:
            for phrase in sorted(self.centroids):
                c = self.centroids[phrase]
                fh.write(f"{phrase}\t{len(c)}\t" + " ".join(repr(float(x)) for x in c.ravel()) + "\n")

    @classmethod
    def load(cls, path) -> "PolysemyModel":
        cents = {}
        with open(path, encoding="utf-8") as fh:
            for k, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise FeatureError(f"{path}:{k}: expected '<phrase>\\t<p>\\t<floats>'")
                p = int(parts[1])
                vals = np.array([float(x) for x in parts[2].split()])
                if p < 1 or len(vals) % p:
                    raise FeatureError(f"{path}:{k}: {len(vals)} values do not split into {p} centroids")
                cents[parts[0]] = vals.reshape(p, -1)
        return cls(cents)


def _occurrences(corpus: Sequence[Verbatim], phrases: set[str]) -> dict[str, list[tuple[int, int]]]:
    """First occurrence (verbatim index, start) of each phrase per verbatim."""
    lengths = sorted({len(p.split()) for p in phrases})
    out: dict[str, list[tuple[int, int]]] = {p: [] for p in phrases}
    for vi, v in enumerate(corpus):
        norms = v.norms
        seen = set()
        for n in lengths:
            for s in range(len(norms) - n + 1):
                p = " ".join(norms[s:s + n])
                if p in out and p not in seen and not v.crosses_boundary(s, n):
                    seen.add(p)
                    out[p].append((vi, s))
    return out


def _fit_from_occurrences(phrase, occ, corpus, table, senses, seed, sample_cap, cap):
    rng = np.random.default_rng(_phrase_seed(phrase, seed))
    if len(occ) > sample_cap:
        pick = np.sort(rng.choice(len(occ), size=sample_cap, replace=False))
        occ = [occ[i] for i in pick]
    n = len(phrase.split())
    X = np.array([context_feature(s, n, corpus[vi].norms, table) for vi, s in occ])
    k = sense_count_for(phrase, senses, cap)
    centroids, _, _ = kmeans(X, k, rng)
    return centroids


def fit_polysemy(corpus: Sequence[Verbatim], table: EmbeddingTable, senses: SenseLexicon, phrase: str,
                 seed: int = 0, sample_cap: int = POLYSEMY_SAMPLE_CAP, cap: int = DEFAULT_SENSE_CAP) -> np.ndarray:
    occ = []
    for vi, v in enumerate(corpus):
        pos = phrase_positions(v, phrase)
        if pos:
            occ.append((vi, pos[0]))
    if not occ:
        raise FeatureError(f"phrase {phrase!r} does not occur in the corpus")
    return _fit_from_occurrences(phrase, occ, corpus, table, senses, seed, sample_cap, cap)


def fit_polysemy_model(corpus: Sequence[Verbatim], table: EmbeddingTable, senses: SenseLexicon,
                       phrases: Iterable[str], seed: int = 0, sample_cap: int = POLYSEMY_SAMPLE_CAP,
                       cap: int = DEFAULT_SENSE_CAP, min_freq: int = POLYSEMY_MIN_FREQ) -> PolysemyModel:
    """Fit centroids for every phrase occurring in at least `min_freq` verbatims."""
    occ = _occurrences(corpus, set(phrases))
    model = PolysemyModel(sample_cap=sample_cap)
    for phrase in sorted(occ):
        if len(occ[phrase]) >= max(min_freq, 1):
            model.centroids[phrase] = _fit_from_occurrences(
                phrase, occ[phrase], corpus, table, senses, seed, sample_cap, cap)
    return model


def nearest_centroid(vec: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = ((centroids - vec) ** 2).sum(axis=1)
    return centroids[int(np.argmin(d))]


def polysemy_feature(start: int, n: int, verbatim: Verbatim, model: PolysemyModel,
                     table: EmbeddingTable) -> np.ndarray:
    phrase = " ".join(verbatim.norms[start:start + n])
    cents = model.centroids.get(phrase)
    if cents is None:
        return np.zeros(2 * table.dim)
    return nearest_centroid(context_feature(start, n, verbatim.norms, table), cents)


class FeatureExtractor:
    """Bundles the models feature assembly needs and caches per-verbatim tagging."""

    def __init__(self, table: EmbeddingTable, onto: SeedOntology, polysemy: PolysemyModel | None = None,
                 tagger: Callable[[Verbatim], list[str]] | None = None):
        self.table = table
        self.onto = onto
        self.polysemy = polysemy or PolysemyModel()
        self.tagger = tagger or BaselineTagger()
        self._cache_id = None
        self._cache = None

    def _verbatim_info(self, v: Verbatim):
        if self._cache_id != (v.id, id(v)):
            self._cache = (self.tagger(v), tag_seed_concepts(v, self.onto))
            self._cache_id = (v.id, id(v))
        return self._cache

    def assemble(self, start: int, n: int, verbatim: Verbatim, schema: FeatureSchema) -> np.ndarray:
        if schema.n != n:
            raise FeatureError(f"schema is for {schema.n}-grams, collocate has {n} tokens")
        if schema.dim != self.table.dim:
            raise FeatureError(f"schema dim {schema.dim} != embedding dim {self.table.dim}")
        tags, spans = self._verbatim_info(verbatim)
        norms = verbatim.norms
        phrase = " ".join(norms[start:start + n])
        parts = []
        ling = None
        for fam in schema.families:
            if fam.endswith("pos"):
                if ling is None:
                    ling = linguistic_features(start, n, tags, spans)
                parts.append(ling[fam])
            elif fam == "word2vec":
                parts.append(np.mean([self.table.lookup(w) for w in norms[start:start + n]], axis=0))
            elif fam == "context":
                parts.append(context_feature(start, n, norms, self.table))
            elif fam == "polysemy":
                parts.append(polysemy_feature(start, n, verbatim, self.polysemy, self.table))
            elif fam == "ontology":
                parts.append(ontology_feature(phrase, self.onto))
        return np.concatenate(parts) if parts else np.zeros(0)

    def matrix(self, items: Iterable[tuple[int, int, Verbatim]], schema: FeatureSchema) -> np.ndarray:
        rows = [self.assemble(s, n, v, schema) for s, n, v in items]
        return np.array(rows).reshape(len(rows), schema.width)


def assemble(start: int, n: int, verbatim: Verbatim, extractor: FeatureExtractor,
             schema: FeatureSchema) -> np.ndarray:
    return extractor.assemble(start, n, verbatim, schema)
