"""Synthetic repair-verbatim corpora with gold concept annotations.

Concept phrases are built from slot grammars per type (A parts,
B symptoms, C actions), dropped into sentence templates, and then noised
with misspellings, run-on words, split words and abbreviations. Every noise
event is recorded in an answer key, and gold spans refer to the clean text.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Verbatim, render, tokenize
from .fileio import atomic_open, write_tsv

PART_GRAMMAR = {
    1: [["alternator", "starter", "thermostat", "compressor", "battery", "radiator", "engine", "transmission",
         "muffler", "turbocharger", "differential", "axle", "camshaft", "crankshaft", "injector", "caliper",
         "rotor", "driveshaft", "condenser", "evaporator", "flywheel", "manifold", "bumper", "windshield"]],
    2: [["fuel", "brake", "engine", "oil", "coolant", "transmission", "steering", "exhaust", "ignition",
         "throttle", "door", "window", "seat", "wiper", "battery", "radiator", "wheel", "airbag", "cabin",
         "power", "tire", "tank"],
        ["pump", "sensor", "module", "relay", "valve", "switch", "motor", "hose", "filter", "belt",
         "harness", "actuator", "gasket", "solenoid", "connector", "bearing", "housing", "line"]],
}
PART_GRAMMAR[3] = [PART_GRAMMAR[2][0], ["control", "pressure", "position", "speed", "temperature", "level",
                                         "lock", "return", "vent", "drive"], PART_GRAMMAR[2][1]]
PART_GRAMMAR[4] = [["front", "rear", "left", "right", "upper", "lower", "inner", "outer"]] + PART_GRAMMAR[3]

SYMPTOM_GRAMMAR = {
    1: [["leaking", "stalling", "overheating", "misfiring", "vibrating", "grinding", "squealing", "inoperative",
         "shuddering", "rattling", "clunking", "hesitating", "smoking", "knocking", "whining", "slipping",
         "sticking", "flickering", "binding", "chattering", "popping", "humming"]],
    2: [["rough", "hard", "low", "high", "metallic", "burning", "erratic", "weak", "loose"],
        ["idle", "start", "noise", "smell", "vibration", "pressure", "leak", "temperature", "shudder",
         "squeal", "output", "response"]],
}
SYMPTOM_GRAMMAR[3] = [["intermittent", "excessive", "severe", "loud", "slight", "constant"]] + SYMPTOM_GRAMMAR[2]
SYMPTOM_GRAMMAR[4] = [["recurring", "sudden", "occasional", "persistent"]] + SYMPTOM_GRAMMAR[3]

_VERBS = ["replaced", "reprogrammed", "adjusted", "cleaned", "inspected", "tightened", "lubricated",
          "recalibrated", "resealed", "reflashed", "flushed", "realigned", "rewired", "repaired", "installed",
          "removed", "tested", "reset", "drained", "refilled", "torqued", "updated"]
ACTION_GRAMMAR = {
    1: [_VERBS],
    2: [["software", "fluid", "system", "torque", "adaptive", "calibration", "firmware", "alignment"], _VERBS],
}
ACTION_GRAMMAR[3] = ACTION_GRAMMAR[2] + [_VERBS]
ACTION_GRAMMAR[4] = ACTION_GRAMMAR[3] + [_VERBS]

DEFAULT_POOLS = {"A": PART_GRAMMAR, "B": SYMPTOM_GRAMMAR, "C": ACTION_GRAMMAR}

STOP_WORDS = ["the", "a", "an", "is", "and", "to", "of", "with", "on", "at", "in", "was", "has", "for", "after",
              "when", "while", "it", "that", "this", "as", "per", "be", "are", "were", "had", "from", "by", "no"]
NOISE_WORDS = ["please", "thanks", "etc", "approx"]
FILLER_WORDS = ["customer", "states", "reports", "technician", "found", "dealer", "verified", "concern",
                "bulletin", "pulled", "code", "test", "drove", "vehicle", "ok", "repair", "advised", "cold",
                "today", "again", "checked", "noted", "during", "warranty", "inspection", "c/s"]
GENERAL_WORDS = ["car", "cart", "tire", "ire", "part", "parts", "light", "lights", "sound", "water", "cool",
                 "hot", "fast", "slow", "time", "mile", "miles", "road", "drive", "start", "stop", "turn",
                 "left", "right", "open", "close", "works", "work", "said", "says", "new", "old", "good", "bad",
                 "fine", "check", "hear", "heard", "seen", "see", "look", "looks", "hard", "soft", "low", "high",
                 "run", "runs", "ran", "went", "go", "goes", "back", "side", "top", "bottom", "noise", "smell",
                 "leak", "leaks", "fluid", "oil", "gas", "key", "lock", "door", "seat", "belt", "line", "lines",
                 "control", "level", "speed", "power", "sensor", "module", "valve", "pump", "motor", "switch",
                 "cable", "wire", "wires", "plug", "plugs", "cap", "caps", "pin", "pins", "bolt", "bolts", "nut",
                 "nuts", "screw", "screws", "seal", "seals", "ring", "rings", "pad", "pads", "shoe", "shoes",
                 "fan", "fans", "horn", "mirror", "roof", "hood", "trunk", "panel", "dash", "gauge", "meter",
                 "tested", "tester", "testing", "rate", "late", "later", "mate", "date", "gate", "hate"]

SENTENCES = {
    "complaint": [
        "customer states {B}",
        "customer states the {A} is {B}",
        "c/s {A} {B}",
        "customer reports {B} from the {A}",
        "customer states {B} when cold",
        "{A} {B} again",
    ],
    "diagnosis": [
        "technician found {A} {B}",
        "found {B} at the {A}",
        "checked {A} and found {B}",
        "inspection found {B} on the {A}",
    ],
    "repair": [
        "{C} the {A}",
        "technician {C} {A}",
        "{C} {A} as per bulletin",
        "{C} {A} and {C}",
        "{C} the {A} under warranty",
    ],
    "closing": [
        "pulled code {NUM}",
        "test drove vehicle ok",
        "verified repair",
        "advised customer",
        "dealer verified concern",
        "noted during inspection today",
    ],
}


class SynthError(ValueError):
    pass


@dataclass
class SynthSpec:
    pools: dict = field(default_factory=lambda: DEFAULT_POOLS)
    concepts_per_type: int = 100
    length_weights: tuple[float, ...] = (0.2, 0.35, 0.3, 0.15)
    sentences: dict = field(default_factory=lambda: SENTENCES)
    misspell_rate: float = 0.05
    runon_rate: float = 0.05
    whitespace_rate: float = 0.05
    abbreviation_rate: float = 0.05
    holdout: float = 0.3
    test_fraction: float = 0.2
    remark_rate: float = 0.7
    zipf_exponent: float = 0.5

    def validate(self) -> None:
        for name in ("misspell_rate", "runon_rate", "whitespace_rate", "abbreviation_rate", "test_fraction",
                     "remark_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SynthError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.holdout < 1.0:
            raise SynthError("holdout must lie in [0, 1)")
        if self.zipf_exponent < 0:
            raise SynthError("zipf_exponent must be non-negative")
        if not self.pools:
            raise SynthError("no concept types")
        for t, grammar in self.pools.items():
            if not grammar or any(not slot for slots in grammar.values() for slot in slots):
                raise SynthError(f"empty vocabulary pool for type {t}")

    @property
    def noise_free(self) -> bool:
        return not (self.misspell_rate or self.runon_rate or self.whitespace_rate or self.abbreviation_rate)


@dataclass
class Concept:
    phrase: str
    type: str
    heldout: bool = False


@dataclass
class SynthCorpus:
    raw: list[Verbatim]
    clean: list[Verbatim]
    gold: list[tuple[str, int, int, str, str]]  # (vid, start, n, phrase, type) on clean tokens
    noise: list[tuple[str, str, str, str]]  # (vid, step, noisy, clean)
    concepts: list[Concept]
    ontology: dict[str, str]
    dictionary: list[str]
    abbreviations: dict[str, list[str]]
    abbreviation_truth: dict[str, str]
    senses: dict[str, int]
    pos_lexicon: dict[str, str]
    stop_words: list[str]
    noise_words: list[str]
    test_ids: set[str]

    def train(self) -> list[Verbatim]:
        return [v for v in self.raw if v.id not in self.test_ids]

    def test(self) -> list[Verbatim]:
        return [v for v in self.raw if v.id in self.test_ids]

    def write(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)

        def corpus_file(name, vs):
            with atomic_open(d / name) as fh:
                for v in vs:
                    fh.write(f"{v.id}\t{v.raw_text}\n")

        corpus_file("corpus_raw.tsv", self.raw)
        corpus_file("train_raw.tsv", self.train())
        corpus_file("test_raw.tsv", self.test())
        corpus_file("clean.tsv", self.clean)
        write_tsv(d / "gold.tsv", self.gold)
        write_tsv(d / "test_gold.tsv", [g for g in self.gold if g[0] in self.test_ids])
        write_tsv(d / "noise.tsv", self.noise)
        write_tsv(d / "concepts.tsv", [(c.phrase, c.type, "heldout" if c.heldout else "seed")
                                       for c in self.concepts])
        write_tsv(d / "ontology.tsv", sorted(self.ontology.items()))
        write_tsv(d / "dictionary.txt", [(w,) for w in self.dictionary])
        write_tsv(d / "abbreviations.tsv", [(a, "|".join(ffs)) for a, ffs in sorted(self.abbreviations.items())])
        write_tsv(d / "abbreviation_truth.tsv", sorted(self.abbreviation_truth.items()))
        write_tsv(d / "senses.tsv", sorted(self.senses.items()))
        write_tsv(d / "pos_lexicon.tsv", sorted(self.pos_lexicon.items()))
        write_tsv(d / "stopwords.txt", [(w,) for w in self.stop_words])
        write_tsv(d / "noisewords.txt", [(w,) for w in self.noise_words])


def _sample_concepts(spec: SynthSpec, rng: np.random.Generator) -> list[Concept]:
    taken: set[str] = set()
    out = []
    weights = np.asarray(spec.length_weights, dtype=float)
    for t in sorted(spec.pools):
        grammar = spec.pools[t]
        lengths = sorted(grammar)
        w = np.array([weights[n - 1] if n - 1 < len(weights) else 0.0 for n in lengths])
        w = w / w.sum()
        quota = np.floor(w * spec.concepts_per_type).astype(int)
        quota[np.argmax(w)] += spec.concepts_per_type - quota.sum()
        for n, q in zip(lengths, quota):
            slots = grammar[n]
            got, tries = 0, 0
            while got < q and tries < 200 * (q + 1):
                tries += 1
                words = [slot[rng.integers(len(slot))] for slot in slots]
                if len(set(words)) != len(words):
                    continue
                phrase = " ".join(words)
                if phrase in taken:
                    continue
                taken.add(phrase)
                out.append(Concept(phrase, t))
                got += 1
    return out


def _initials(phrase: str) -> str:
    return "".join(w[0] for w in phrase.split())


def _fill(template: str, pick, rng) -> tuple[list[str], list[tuple[int, int, str, str]]]:
    tokens: list[str] = []
    spans = []
    for piece in template.split():
        if piece.startswith("{") and piece.endswith("}"):
            slot = piece[1:-1]
            if slot == "NUM":
                tokens.append(str(int(rng.integers(100, 999))))
                continue
            c = pick(slot)
            spans.append((len(tokens), len(c.phrase.split()), c.phrase, c.type))
            tokens.extend(c.phrase.split())
        else:
            tokens.append(piece)
    return tokens, spans


def _misspell(word: str, correct: set[str], avoid: set[str], rng) -> str | None:
    letters = string.ascii_lowercase
    for _ in range(20):
        i = int(rng.integers(len(word)))
        kind = rng.integers(3)
        if kind == 0 and len(word) > 4:
            cand = word[:i] + word[i + 1:]
        elif kind == 1:
            cand = word[:i] + letters[rng.integers(26)] + word[i + 1:]
        else:
            cand = word[:i] + letters[rng.integers(26)] + word[i:]
        if cand != word and cand not in correct and cand not in avoid:
            return cand
    return None


def _split_word(word: str, correct: set[str], avoid: set[str], rng) -> tuple[str, str] | None:
    cuts = [i for i in range(2, len(word) - 1)
            if word[:i] not in correct and word[i:] not in correct
            and word[:i] not in avoid and word[i:] not in avoid]
    if not cuts:
        return None
    i = cuts[int(rng.integers(len(cuts)))]
    return word[:i], word[i:]


def generate_synthetic(spec: SynthSpec | None = None, size: int = 10_000, seed: int = 0,
                       abbreviation_type: str = "A") -> SynthCorpus:
    spec = spec or SynthSpec()
    spec.validate()
    rng = np.random.default_rng(seed)
    concepts = _sample_concepts(spec, rng)
    by_type: dict[str, list[Concept]] = {}
    for c in concepts:
        by_type.setdefault(c.type, []).append(c)
    for t in spec.pools:
        if not by_type.get(t):
            raise SynthError(f"empty vocabulary pool for type {t}")

    n_hold = int(round(spec.holdout * len(concepts)))
    for i in rng.choice(len(concepts), size=n_hold, replace=False):
        concepts[i].heldout = True
    ontology = {c.phrase: c.type for c in concepts if not c.heldout}

    concept_words = {w for c in concepts for w in c.phrase.split()}
    stop = list(STOP_WORDS)
    template_words = {w for ts in spec.sentences.values() for t in ts for w in t.split()
                      if w.isalpha()}
    dictionary = sorted(set(GENERAL_WORDS) | concept_words | set(stop) | set(NOISE_WORDS)
                        | {w for w in FILLER_WORDS if w.isalpha()} | template_words)
    correct = set(dictionary)
    # free text that is never a concept: diversifies the irrelevant collocates
    remark_words = sorted(set(GENERAL_WORDS) - concept_words)

    # ambiguous abbreviations: multi-word concepts sharing initials
    groups: dict[str, list[str]] = {}
    for c in concepts:
        if c.type == abbreviation_type and len(c.phrase.split()) >= 2:
            groups.setdefault(_initials(c.phrase), []).append(c.phrase)
    abbreviations, truth = {}, {}
    for abbr in sorted(groups):
        if abbr in correct or len(abbr) < 2:
            continue
        forms = sorted(groups[abbr])
        abbreviations[abbr] = forms
        truth[abbr] = forms[int(rng.integers(len(forms)))]
    planted_for = {ff: a for a, ff in truth.items()}
    avoid = set(abbreviations)

    # Zipf-like popularity inside each type
    popularity = {}
    for t, cs in by_type.items():
        w = 1.0 / np.arange(1, len(cs) + 1) ** spec.zipf_exponent
        order = rng.permutation(len(cs))
        popularity[t] = (cs, w[order] / w.sum())

    def pick(slot):
        cs, p = popularity[slot]
        return cs[int(rng.choice(len(cs), p=p))]

    raw, clean, gold, noise = [], [], [], []
    width = len(str(size))
    for k in range(size):
        vid = f"v{k:0{width}d}"
        parts = ["complaint"]
        if rng.random() < 0.5:
            parts.append("diagnosis")
        parts.append("repair")
        if rng.random() < 0.6:
            parts.append("closing")
        if remark_words and rng.random() < spec.remark_rate:
            parts.insert(int(rng.integers(1, len(parts) + 1)), "remark")
        tokens: list[str] = []
        boundaries: list[int] = []
        spans = []
        for part in parts:
            if part == "remark":
                toks = [remark_words[i] for i in rng.choice(len(remark_words), size=int(rng.integers(2, 6)))]
                sp = []
            else:
                tpl = spec.sentences[part][int(rng.integers(len(spec.sentences[part])))]
                toks, sp = _fill(tpl, pick, rng)
            spans.extend((s + len(tokens), n, p, t) for s, n, p, t in sp)
            tokens.extend(toks)
            boundaries.append(len(tokens) - 1)
        if rng.random() < 0.05:
            tokens.insert(0, NOISE_WORDS[int(rng.integers(len(NOISE_WORDS)))])
            boundaries = [b + 1 for b in boundaries]
            spans = [(s + 1, n, p, t) for s, n, p, t in spans]
        clean_v = Verbatim.from_norms(vid, tokens, boundaries)
        clean.append(clean_v)
        gold.extend((vid, s, n, p, t) for s, n, p, t in spans)

        # noise: units are lists of output tokens, one per clean token or abbreviated span
        out: list[list[str]] = [[w] for w in tokens]
        brk = [i in boundaries for i in range(len(tokens))]
        touched = [False] * len(tokens)
        for s, n, p, t in spans:
            a = planted_for.get(p)
            if a is not None and rng.random() < spec.abbreviation_rate:
                out[s] = [a]
                for j in range(s + 1, s + n):
                    out[j] = []
                for j in range(s, s + n):
                    touched[j] = True
                noise.append((vid, "abbrev", a, p))
        for i, w in enumerate(tokens):
            if touched[i] or not w.isalpha():
                continue
            r = rng.random()
            if r < spec.whitespace_rate and len(w) >= 6:
                pieces = _split_word(w, correct, avoid, rng)
                if pieces:
                    out[i] = list(pieces)
                    touched[i] = True
                    noise.append((vid, "whitespace", " ".join(pieces), w))
                continue
            r -= spec.whitespace_rate
            if r < spec.runon_rate:
                j = i + 1
                if j < len(tokens) and not brk[i] and not touched[j] and tokens[j].isalpha():
                    fused = w + tokens[j]
                    if fused not in correct and fused not in avoid:
                        out[i] = [fused]
                        out[j] = []
                        touched[i] = touched[j] = True
                        noise.append((vid, "runon", fused, f"{w} {tokens[j]}"))
                continue
            r -= spec.runon_rate
            if r < spec.misspell_rate and len(w) >= 4 and w not in stop:
                bad = _misspell(w, correct, avoid, rng)
                if bad:
                    out[i] = [bad]
                    touched[i] = True
                    noise.append((vid, "misspell", bad, w))
        noisy_tokens, noisy_bounds = [], []
        for i, unit in enumerate(out):
            noisy_tokens.extend(unit)
            if brk[i] and noisy_tokens:
                noisy_bounds.append(len(noisy_tokens) - 1)
        text = render(noisy_tokens, noisy_bounds)
        raw.append(Verbatim.from_text(vid, text))

    senses = {}
    for w in dictionary:
        senses[w] = int(rng.choice([1, 1, 1, 2, 2, 3, 4, 6]))
    pos = {}
    for w in concept_words | set(FILLER_WORDS):
        pos[w] = "NOUN"
    for w in SYMPTOM_GRAMMAR[2][0] + SYMPTOM_GRAMMAR[3][0] + SYMPTOM_GRAMMAR[4][0]:
        pos[w] = "ADJ"
    for w in SYMPTOM_GRAMMAR[1][0] + _VERBS + ["found", "states", "reports", "checked", "pulled", "drove",
                                                  "verified", "advised", "noted"]:
        pos[w] = "VERB"
    for w in ("again", "today"):
        pos[w] = "ADV"

    n_test = int(round(spec.test_fraction * size))
    test_ids = {v.id for v in raw[size - n_test:]} if n_test else set()
    return SynthCorpus(raw, clean, gold, noise, concepts, ontology, dictionary, abbreviations, truth,
                       senses, pos, stop, list(NOISE_WORDS), test_ids)


# ---------------------------------------------------------------- abbreviation-only corpora

@dataclass
class AbbreviationCorpus:
    corpus: list[Verbatim]
    abbreviations: dict[str, list[str]]
    truth: dict[str, str]  # abbreviation -> planted expansion
    planted: list[tuple[str, str, str]]  # (vid, abbr, planted expansion)
    dictionary: list[str]


_ABBR_WORDS = ["throttle", "tire", "tank", "position", "pressure", "level", "sensor", "switch", "valve",
               "body", "brake", "booster", "battery", "bracket", "cable", "coil", "cover", "control",
               "clutch", "camshaft", "crank", "duct", "damper", "drive", "door", "exhaust", "engine",
               "fuel", "fan", "filter", "gauge", "gear", "heater", "hose", "idle", "intake", "joint",
               "knock", "lamp", "link", "lock", "manifold", "mass", "motor", "mount", "nozzle", "oil",
               "oxygen", "pedal", "pump", "purge", "rail", "rear", "relay", "seal", "shaft", "spark",
               "speed", "steering", "strut", "temp", "timing", "torque", "trans", "tube", "unit", "vacuum",
               "vent", "wheel", "wiper"]


def generate_abbreviation_corpus(n_abbr: int = 10, size: int = 10_000, seed: int = 0,
                                 context_words: int = 6, own_context: float = 0.8,
                                 abbr_rate: float = 0.3, mixed: bool = False) -> AbbreviationCorpus:
    """Corpus where each abbreviation stands for one planted expansion.

    Every expansion has its own preferred context words; a verbatim draws
    most of its context from the preferred set of the expansion it talks
    about and the rest from sibling expansions. With ``mixed=True`` each
    abbreviated occurrence plants a random expansion instead of a fixed one.
    """
    rng = np.random.default_rng(seed)
    words = list(_ABBR_WORDS)
    by_letter: dict[str, list[str]] = {}
    for w in words:
        by_letter.setdefault(w[0], []).append(w)
    abbreviations: dict[str, list[str]] = {}
    truth: dict[str, str] = {}
    contexts: dict[str, list[str]] = {}
    ctx_pool = [f"{a}{b}" for a in ("ka", "lo", "mi", "nu", "pe", "ro", "sa", "te", "vu", "zo",
                                    "bi", "do", "fa", "gi", "ha", "ju", "ke", "li", "mo", "ne")
                for b in ("bar", "dex", "fin", "gul", "hap", "jor", "kel", "mun", "pif", "ruz",
                          "sil", "tov", "wen", "yap", "zek", "cor", "dam", "fel", "gor", "hib")]
    rng.shuffle(ctx_pool)
    used_abbr = set()
    while len(abbreviations) < n_abbr:
        k = int(rng.integers(2, 4))
        letters = "".join(rng.choice(list("bcdfmpstv"), size=3))
        if letters in used_abbr:
            continue
        forms = []
        for _ in range(k):
            for _try in range(200):
                ff = " ".join(str(rng.choice(by_letter[ch])) for ch in letters)
                if ff not in forms and len(set(ff.split())) == 3:
                    forms.append(ff)
                    break
        if len(forms) < 2:
            continue
        used_abbr.add(letters)
        abbreviations[letters] = forms
        truth[letters] = forms[int(rng.integers(len(forms)))]
        for ff in forms:
            contexts[ff] = [ctx_pool.pop() for _ in range(context_words)]

    generic = ["customer", "states", "vehicle", "checked", "found", "dealer", "replaced", "noise",
               "test", "ok", "again", "light"]
    corpus, planted = [], []
    abbrs = sorted(abbreviations)
    width = len(str(size))
    for k in range(size):
        vid = f"a{k:0{width}d}"
        abbr = abbrs[int(rng.integers(len(abbrs)))]
        forms = abbreviations[abbr]
        use_abbr = rng.random() < abbr_rate
        if use_abbr:
            ff = forms[int(rng.integers(len(forms)))] if mixed else truth[abbr]
            head = [abbr]
            planted.append((vid, abbr, ff))
        else:
            ff = forms[int(rng.integers(len(forms)))]
            head = ff.split()
        ctx = []
        for _ in range(int(rng.integers(3, 6))):
            if rng.random() < own_context:
                pool = contexts[ff]
            else:
                sib = forms[int(rng.integers(len(forms)))]
                pool = contexts[sib]
            ctx.append(pool[int(rng.integers(len(pool)))])
        gen = [generic[int(i)] for i in rng.choice(len(generic), size=3, replace=False)]
        tokens = gen[:2] + head + ctx + gen[2:]
        corpus.append(Verbatim.from_norms(vid, tokens, [len(tokens) - 1]))
    dictionary = sorted(set(words) | set(generic) | {w for c in contexts.values() for w in c})
    return AbbreviationCorpus(corpus, abbreviations, truth, planted, dictionary)
