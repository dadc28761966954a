"""Cleaning of noisy verbatims.

Four repairs run in this order: white-space merges, run-on splits,
misspelling corrections, abbreviation expansion. A word is "correct" when
it is in the dictionary or is a word of some seed-ontology concept.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import CorpusStats, Verbatim, contains_phrase, cooccurring_unigrams
from .embeddings import EmbeddingTable, cosine
from .lexicon import Lexicons

STEPS = ("whitespace", "runon", "misspell", "abbrev")


@dataclass
class AbbreviationContext:
    abbr: str
    full_forms: tuple[str, ...]
    c_abbr: set[str]
    c_n: list[set[str]]
    v: list[str]
    tfidf: dict[str, np.ndarray]
    priors: dict[str, float]


@dataclass
class Correction:
    step: str
    before: str
    after: str


@dataclass
class CorrectionLog:
    verbatim_id: str
    entries: list[Correction] = field(default_factory=list)

    def add(self, step, before, after):
        self.entries.append(Correction(step, before, after))

    def __len__(self):
        return len(self.entries)

    def rows(self):
        for e in self.entries:
            yield (self.verbatim_id, e.step, e.before, e.after)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def distance1_candidates(word: str, vocab: Iterable[str] | set[str], alphabet: str) -> list[str]:
    """Words of `vocab` exactly one insertion, deletion or substitution away."""
    vocab = vocab if isinstance(vocab, (set, frozenset)) else set(vocab)
    edits = set()
    for i in range(len(word) + 1):
        left, right = word[:i], word[i:]
        if right:
            edits.add(left + right[1:])
            for c in alphabet:
                edits.add(left + c + right[1:])
        for c in alphabet:
            edits.add(left + c + right)
    edits.discard(word)
    return sorted(e for e in edits if e in vocab)


def _correct_vocab(lex: Lexicons) -> frozenset[str]:
    return lex.dictionary.entries | lex.ontology.unigrams


def correct_misspelling(word: str, lex: Lexicons, stats: CorpusStats, emb: EmbeddingTable | None,
                        vocab: frozenset[str] | None = None, alphabet: str | None = None) -> str:
    vocab = _correct_vocab(lex) if vocab is None else vocab
    if alphabet is None:
        alphabet = "".join(sorted({c for w in vocab for c in w}))
    candidates = distance1_candidates(word, vocab, alphabet)
    if not candidates:
        return word
    if len(candidates) == 1:
        return candidates[0]
    wvec = emb.lookup(word) if emb is not None else None

    def score(c):
        tf = stats.tf(c)
        if tf <= 0:
            return -math.inf
        sim = cosine(wvec, emb.lookup(c)) if emb is not None else 0.0
        return math.log(tf) * sim

    # candidates are sorted, so max() keeps the lexicographically first on ties
    best = candidates[0]
    best_score = score(best)
    for c in candidates[1:]:
        s = score(c)
        if s > best_score:
            best, best_score = c, s
    return best


def split_runon(word: str, lex: Lexicons, emb: EmbeddingTable | None) -> list[str]:
    splits = [(word[:i], word[i:]) for i in range(1, len(word))
              if lex.is_correct(word[:i]) and lex.is_correct(word[i:])]
    if not splits:
        return [word]
    if len(splits) == 1 or emb is None:
        return list(splits[0])
    wvec = emb.lookup(word)
    best, best_score = splits[0], -math.inf
    for left, right in splits:
        s = max(cosine(wvec, emb.lookup(left)), cosine(wvec, emb.lookup(right)))
        if s > best_score:
            best, best_score = (left, right), s
    return list(best)


def merge_whitespace(left: str, right: str, lex: Lexicons) -> str | None:
    if lex.is_correct(left) or lex.is_correct(right):
        return None
    merged = left + right
    return merged if lex.is_correct(merged) else None


def _phrase_doc_freq(phrase: str, corpus: Sequence[Verbatim], stats: CorpusStats | None) -> int:
    if stats is not None and len(phrase.split()) <= 4:
        return stats.df(phrase)
    return sum(1 for v in corpus if contains_phrase(v, phrase))


def _cooc_counts(corpus: Sequence[Verbatim], phrase: str) -> Counter:
    own = set(phrase.split())
    counts: Counter = Counter()
    for v in corpus:
        if contains_phrase(v, phrase):
            counts.update(w for w in v.norms if w not in own)
    return counts


def build_abbrev_context(abbr: str, full_forms: Sequence[str], corpus: Sequence[Verbatim],
                         stats: CorpusStats) -> AbbreviationContext:
    full_forms = tuple(full_forms)
    c_abbr = cooccurring_unigrams(corpus, abbr)
    c_n = [cooccurring_unigrams(corpus, ff) for ff in full_forms]
    v = set(c_abbr)
    for c in c_n:
        v &= c
    v = sorted(v)
    total = stats.total_docs
    idf = np.array([math.log(total / stats.df(w)) if stats.df(w) else 0.0 for w in v])
    tfidf = {}
    for u in (abbr,) + full_forms:
        counts = _cooc_counts(corpus, u)
        tfidf[u] = np.array([counts[w] for w in v], dtype=np.float64) * idf
    dfs = [_phrase_doc_freq(ff, corpus, stats) for ff in full_forms]
    denom = sum(d + 1 for d in dfs)
    priors = {ff: (d + 1) / denom for ff, d in zip(full_forms, dfs)}
    return AbbreviationContext(abbr, full_forms, c_abbr, c_n, v, tfidf, priors)


def _log_likelihood(v_abbr: np.ndarray, v_ff: np.ndarray) -> float:
    total = v_ff.sum()
    ll = 0.0
    for a, f in zip(v_abbr, v_ff):
        if a == 0:
            continue
        if f <= 0:
            return -math.inf
        ll += a * (math.log(f) - math.log(total))
    return ll


def disambiguate_abbrev(ctx: AbbreviationContext, v_abbr: np.ndarray | None = None) -> tuple[str, dict[str, float]]:
    """Choose the full form with the largest posterior P(ff | abbr).

    `v_abbr` overrides the abbreviation's corpus-wide TF-IDF vector, e.g. with
    counts from a single verbatim.
    """
    forms = ctx.full_forms
    if len(forms) == 1:
        return forms[0], {forms[0]: 1.0}
    priors = np.array([ctx.priors[ff] for ff in forms])
    v_abbr = ctx.tfidf[ctx.abbr] if v_abbr is None else np.asarray(v_abbr, dtype=np.float64)
    use_prior_only = len(ctx.v) == 0 or any(not np.any(ctx.tfidf[ff] > 0) for ff in forms)
    if use_prior_only:
        log_post = np.log(priors)
    else:
        ll = np.array([_log_likelihood(v_abbr, ctx.tfidf[ff]) for ff in forms])
        if np.all(np.isneginf(ll)):
            log_post = np.log(priors)
        else:
            log_post = ll + np.log(priors)
    log_post = log_post - log_post.max()
    post = np.exp(log_post)
    post /= post.sum()
    best = max(range(len(forms)), key=lambda i: (post[i], priors[i], -i))
    return forms[best], {ff: float(p) for ff, p in zip(forms, post)}


def replay_log(tokens: Sequence[str], log: CorrectionLog | Iterable[Correction]) -> list[str]:
    """Re-apply logged corrections, in order, to a raw token sequence."""
    out = list(tokens)
    entries = log.entries if isinstance(log, CorrectionLog) else list(log)
    cursor, step = 0, None
    for e in entries:
        if e.step != step:
            cursor, step = 0, e.step
        before, after = e.before.split(), e.after.split()
        for s in range(cursor, len(out) - len(before) + 1):
            if out[s:s + len(before)] == before:
                out[s:s + len(before)] = after
                cursor = s + len(after)
                break
        else:
            raise ValueError(f"cannot replay {e}: {before} not found")
    return out


class Normalizer:
    """Repairs verbatims against fixed lexicons, corpus statistics and embeddings.

    `corpus` is the collection the abbreviation contexts are gathered from.
    With ``abbrev_scope="corpus"`` each ambiguous abbreviation resolves to a
    single full form for the whole corpus; ``"verbatim"`` scores each
    occurrence with the abbreviation's own verbatim as context.
    """

    def __init__(self, lexicons: Lexicons, stats: CorpusStats, emb: EmbeddingTable | None,
                 corpus: Sequence[Verbatim] = (), abbrev_scope: str = "corpus"):
        if abbrev_scope not in ("corpus", "verbatim"):
            raise ValueError(f"unknown abbreviation scope {abbrev_scope!r}")
        self.lex = lexicons
        self.stats = stats
        self.emb = emb
        self.corpus = list(corpus)
        self.abbrev_scope = abbrev_scope
        self.vocab = _correct_vocab(lexicons)
        self.alphabet = "".join(sorted({c for w in self.vocab for c in w}))
        self._spell_cache: dict[str, str] = {}
        self._runon_cache: dict[str, list[str]] = {}
        self._contexts: dict[str, AbbreviationContext] = {}
        self._choices: dict[str, str] = {}

    def eligible(self, word: str) -> bool:
        return word.isalpha() and word not in self.lex.abbreviations and not self.lex.is_correct(word)

    def context(self, abbr: str) -> AbbreviationContext:
        if abbr not in self._contexts:
            self._contexts[abbr] = build_abbrev_context(
                abbr, self.lex.abbreviations.get(abbr), self.corpus, self.stats)
        return self._contexts[abbr]

    def expand(self, abbr: str, verbatim_norms: Sequence[str] = ()) -> str:
        forms = self.lex.abbreviations.get(abbr)
        if len(forms) == 1:
            return forms[0]
        if self.abbrev_scope == "corpus":
            if abbr not in self._choices:
                self._choices[abbr] = disambiguate_abbrev(self.context(abbr))[0]
            return self._choices[abbr]
        ctx = self.context(abbr)
        counts = Counter(verbatim_norms)
        idf = np.array([math.log(self.stats.total_docs / self.stats.df(w)) if self.stats.df(w) else 0.0
                        for w in ctx.v])
        local = np.array([counts[w] for w in ctx.v], dtype=np.float64) * idf
        if not np.any(local > 0):
            local = None
        return disambiguate_abbrev(ctx, local)[0]

    def spell(self, word: str) -> str:
        if word not in self._spell_cache:
            self._spell_cache[word] = correct_misspelling(
                word, self.lex, self.stats, self.emb, self.vocab, self.alphabet)
        return self._spell_cache[word]

    def runon(self, word: str) -> list[str]:
        if word not in self._runon_cache:
            self._runon_cache[word] = split_runon(word, self.lex, self.emb)
        return self._runon_cache[word]

    def normalize(self, v: Verbatim) -> tuple[Verbatim, CorrectionLog]:
        log = CorrectionLog(v.id)
        toks = [[w, i in v.boundaries] for i, w in enumerate(v.norms)]

        merged = []
        i = 0
        while i < len(toks):
            w, brk = toks[i]
            if i + 1 < len(toks) and not brk:
                nxt = toks[i + 1][0]
                m = None
                if w.isalpha() and nxt.isalpha() and w not in self.lex.abbreviations \
                        and nxt not in self.lex.abbreviations:
                    m = merge_whitespace(w, nxt, self.lex)
                if m is not None:
                    log.add("whitespace", f"{w} {nxt}", m)
                    merged.append([m, toks[i + 1][1]])
                    i += 2
                    continue
            merged.append([w, brk])
            i += 1
        toks = merged

        split = []
        for w, brk in toks:
            parts = self.runon(w) if self.eligible(w) else [w]
            if len(parts) > 1:
                log.add("runon", w, " ".join(parts))
                split.extend([p, False] for p in parts[:-1])
                split.append([parts[-1], brk])
            else:
                split.append([w, brk])
        toks = split

        for t in toks:
            if self.eligible(t[0]):
                fixed = self.spell(t[0])
                if fixed != t[0]:
                    log.add("misspell", t[0], fixed)
                    t[0] = fixed

        norms_now = [w for w, _ in toks]
        expanded = []
        for w, brk in toks:
            if w in self.lex.abbreviations:
                full = self.expand(w, norms_now)
                log.add("abbrev", w, full)
                parts = full.split()
                expanded.extend([p, False] for p in parts[:-1])
                expanded.append([parts[-1], brk])
            else:
                expanded.append([w, brk])
        toks = expanded

        if not log.entries:
            return v, log
        norms = [w for w, _ in toks]
        boundaries = [i for i, (_, brk) in enumerate(toks) if brk]
        return Verbatim.from_norms(v.id, norms, boundaries), log

    def normalize_corpus(self, corpus: Iterable[Verbatim]) -> tuple[list[Verbatim], list[CorrectionLog]]:
        out, logs = [], []
        for v in corpus:
            nv, log = self.normalize(v)
            out.append(nv)
            logs.append(log)
        return out, logs


def normalize_verbatim(v: Verbatim, lexicons: Lexicons, stats: CorpusStats, emb: EmbeddingTable | None,
                       corpus: Sequence[Verbatim] = ()) -> tuple[Verbatim, CorrectionLog]:
    return Normalizer(lexicons, stats, emb, corpus).normalize(v)
