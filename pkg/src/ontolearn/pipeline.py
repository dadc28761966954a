"""Training-set construction, two-stage training, inference and active learning."""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import MAX_N, Collocate, CorpusStats, Verbatim, extract_ngrams
from .embeddings import EmbeddingTable
from .features import FAMILIES, FeatureExtractor, FeatureSchema, PolysemyModel, fit_polysemy_model
from .fileio import atomic_open, write_tsv
from .forest import ForestConfig, ForestModel, train_forest
from .lexicon import SeedOntology, StopNoiseLists
from .seedtag import ConceptSpan, tag_seed_concepts

log = logging.getLogger(__name__)

CONCEPT = "CONCEPT"
IRRELEVANT = "IRRELEVANT"
STAGE1_CLASSES = (CONCEPT, IRRELEVANT)
COMMITTEE_SIZE = 8
BUNDLE_FORMAT = "ontolearn-bundle"


@dataclass(frozen=True)
class LabeledSample:
    verbatim_id: str
    start: int
    n: int
    phrase: str
    label: str  # CONCEPT or IRRELEVANT
    type: str | None = None  # concept type, stage-2 only
    source: str = "seed-ontology"

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.verbatim_id, self.start, self.n)


@dataclass
class TrainingSet:
    samples: dict[int, list[LabeledSample]] = field(default_factory=dict)

    def stage1(self, n: int) -> list[LabeledSample]:
        return self.samples.get(n, [])

    def stage2(self, n: int) -> list[LabeledSample]:
        return [s for s in self.samples.get(n, []) if s.label == CONCEPT and s.type is not None]

    @property
    def ns(self) -> list[int]:
        return sorted(n for n, s in self.samples.items() if s)

    def __len__(self) -> int:
        return sum(len(s) for s in self.samples.values())

    def keys(self) -> set[tuple[str, int, int]]:
        return {s.key for ss in self.samples.values() for s in ss}

    def add(self, sample: LabeledSample) -> bool:
        if sample.key in self.keys():
            return False
        self.samples.setdefault(sample.n, []).append(sample)
        return True

    def save(self, path) -> None:
        rows = []
        for n in sorted(self.samples):
            for s in self.samples[n]:
                label = s.type if (s.label == CONCEPT and s.type) else s.label
                rows.append((s.phrase, s.verbatim_id, s.start, s.n, label, s.source))
        write_tsv(path, rows)

    @classmethod
    def load(cls, path) -> "TrainingSet":
        ts = cls()
        for s in read_labels(path):
            ts.samples.setdefault(s.n, []).append(s)
        return ts


def read_labels(path, default_source: str = "manual") -> list[LabeledSample]:
    """Parse `<phrase>\\t<verbatim_id>\\t<start>\\t<n>\\t<label>[\\t<source>]` lines.

    The label is IRRELEVANT, CONCEPT, or a concept type (which implies CONCEPT).
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) not in (5, 6):
                raise ValueError(f"{path}:{k}: expected 5 or 6 tab-separated fields")
            phrase, vid, start, n, label = parts[:5]
            source = parts[5] if len(parts) == 6 else default_source
            try:
                start, n = int(start), int(n)
            except ValueError:
                raise ValueError(f"{path}:{k}: start and n must be integers") from None
            if label in (CONCEPT, IRRELEVANT):
                out.append(LabeledSample(vid, start, n, phrase, label, None, source))
            else:
                out.append(LabeledSample(vid, start, n, phrase, CONCEPT, label, source))
    return out


def _clean_spans(verbatim: Verbatim, stopnoise: StopNoiseLists, max_n: int) -> list[Collocate]:
    norms = verbatim.norms
    bad = [stopnoise.excluded(w) for w in norms]
    return [c for c in extract_ngrams(verbatim, max_n) if not any(bad[c.start:c.end])]


def generate_candidates(verbatim: Verbatim, stopnoise: StopNoiseLists, max_n: int = MAX_N) -> list[Collocate]:
    return _clean_spans(verbatim, stopnoise, max_n)


def collect_irrelevant(verbatim: Verbatim, concept_spans: Sequence[ConceptSpan], stopnoise: StopNoiseLists,
                       max_n: int = MAX_N) -> list[Collocate]:
    return [c for c in _clean_spans(verbatim, stopnoise, max_n)
            if not any(c.overlaps(s.start, s.end) for s in concept_spans)]


def build_training_set(corpus: Sequence[Verbatim], onto: SeedOntology, stopnoise: StopNoiseLists,
                       per_n_quota: int = 50_000, seed: int = 0, max_n: int = MAX_N) -> TrainingSet:
    concepts: dict[int, list[LabeledSample]] = defaultdict(list)
    irrelevant: dict[int, list[LabeledSample]] = defaultdict(list)
    for v in corpus:
        spans = tag_seed_concepts(v, onto, max_n)
        for s in spans:
            concepts[s.n].append(LabeledSample(v.id, s.start, s.n, s.phrase, CONCEPT, s.type, "seed-ontology"))
        for c in collect_irrelevant(v, spans, stopnoise, max_n):
            irrelevant[c.n].append(LabeledSample(v.id, c.start, c.n, c.phrase, IRRELEVANT, None, "seed-ontology"))

    rng = np.random.default_rng(seed)
    ts = TrainingSet()
    for n in range(1, max_n + 1):
        if not concepts[n]:
            log.warning("no seed concept occurrences of length %d; %d-gram models are skipped", n, n)
            continue
        picked = []
        for pool in (concepts[n], irrelevant[n]):
            if len(pool) > per_n_quota:
                idx = np.sort(rng.choice(len(pool), size=per_n_quota, replace=False))
                picked.extend(pool[i] for i in idx)
            else:
                picked.extend(pool)
        ts.samples[n] = picked
    return ts


def frequent_unlabeled(corpus: Sequence[Verbatim], onto: SeedOntology, stopnoise: StopNoiseLists,
                       min_freq: int, max_n: int = MAX_N) -> list[tuple[str, int]]:
    """Untagged candidate phrases with corpus frequency >= min_freq, most frequent first."""
    counts: Counter = Counter()
    for v in corpus:
        spans = tag_seed_concepts(v, onto, max_n)
        tagged = {(s.start, s.n) for s in spans}
        for c in generate_candidates(v, stopnoise, max_n):
            if (c.start, c.n) not in tagged and c.phrase not in onto:
                counts[c.phrase] += 1
    out = [(p, f) for p, f in counts.items() if f >= min_freq]
    out.sort(key=lambda pf: (-pf[1], pf[0]))
    return out


def write_label_requests(path, requests: Iterable[tuple[str, int]]) -> None:
    """`<phrase>\t<frequency>\t?` rows; replace `?` with a type or IRRELEVANT."""
    write_tsv(path, [(p, f, "?") for p, f in requests])


def read_phrase_labels(path) -> dict[str, str]:
    """Completed label-request file: `<phrase>\t<frequency>\t<label>`; `?` rows are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{k}: expected '<phrase>\\t<frequency>\\t<label>'")
            if parts[2] != "?":
                out[parts[0]] = parts[2]
    return out


def phrase_label_samples(corpus: Sequence[Verbatim], stopnoise: StopNoiseLists,
                         labels: Mapping[str, str]) -> list[LabeledSample]:
    """Every candidate occurrence of a labeled phrase, as manual samples."""
    out = []
    for v in corpus:
        for c in generate_candidates(v, stopnoise):
            lab = labels.get(c.phrase)
            if lab is None:
                continue
            if lab in (CONCEPT, IRRELEVANT):
                out.append(LabeledSample(v.id, c.start, c.n, c.phrase, lab, None, "manual"))
            else:
                out.append(LabeledSample(v.id, c.start, c.n, c.phrase, CONCEPT, lab, "manual"))
    return out


@dataclass
class TwoStageModel:
    stage1: dict[int, ForestModel]
    stage2: dict[int, ForestModel]
    schemas: dict[int, FeatureSchema]
    types: tuple[str, ...]
    embeddings: EmbeddingTable
    polysemy: PolysemyModel
    lexicon_fingerprint: str = ""
    config: dict = field(default_factory=dict)

    @property
    def ns(self) -> list[int]:
        return sorted(self.stage1)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        files = {}

        def put(name, text):
            with atomic_open(d / name) as fh:
                fh.write(text)
            files[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()

        for n in self.ns:
            put(f"schema_{n}.json", json.dumps(self.schemas[n].to_dict(), sort_keys=True))
            put(f"stage1_{n}.json", self.stage1[n].dumps())
            put(f"stage2_{n}.json", self.stage2[n].dumps())
        self.embeddings.save(d / "embeddings.txt")
        files["embeddings.txt"] = hashlib.sha256((d / "embeddings.txt").read_bytes()).hexdigest()
        self.polysemy.save(d / "polysemy.tsv")
        files["polysemy.tsv"] = hashlib.sha256((d / "polysemy.tsv").read_bytes()).hexdigest()
        manifest = {
            "format": BUNDLE_FORMAT,
            "version": 1,
            "ns": self.ns,
            "types": list(self.types),
            "lexicon_fingerprint": self.lexicon_fingerprint,
            "config": self.config,
            "files": files,
        }
        with atomic_open(d / "manifest.json") as fh:
            fh.write(json.dumps(manifest, sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "TwoStageModel":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        if manifest.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"{d} is not a model bundle")
        stage1, stage2, schemas = {}, {}, {}
        for n in manifest["ns"]:
            schemas[n] = FeatureSchema.from_dict(json.loads((d / f"schema_{n}.json").read_text()))
            stage1[n] = ForestModel.load(d / f"stage1_{n}.json")
            stage2[n] = ForestModel.load(d / f"stage2_{n}.json")
            for m in (stage1[n], stage2[n]):
                if m.schema_hash != schemas[n].fingerprint():
                    raise ValueError(f"forest for n={n} was trained under a different feature schema")
        return cls(stage1, stage2, schemas, tuple(manifest["types"]),
                   EmbeddingTable.load(d / "embeddings.txt"), PolysemyModel.load(d / "polysemy.tsv"),
                   manifest.get("lexicon_fingerprint", ""), manifest.get("config", {}))


def featurize(samples: Sequence[LabeledSample], verbatims: Mapping[str, Verbatim],
              extractor: FeatureExtractor, schema: FeatureSchema) -> np.ndarray:
    return extractor.matrix(((s.start, s.n, verbatims[s.verbatim_id]) for s in samples), schema)


def fit_polysemy_for(corpus: Sequence[Verbatim], table: EmbeddingTable, lexicons, stopnoise: StopNoiseLists,
                     stats: CorpusStats | None = None, seed: int = 0, sample_cap: int = 1000,
                     p_max: int = 10, min_freq: int = 20, max_n: int = MAX_N) -> PolysemyModel:
    """Fit polysemy centroids for every frequent candidate phrase of the corpus."""
    counts: Counter = Counter()
    for v in corpus:
        counts.update({c.phrase for c in generate_candidates(v, stopnoise, max_n)})
    phrases = [p for p, c in counts.items() if c >= min_freq]
    return fit_polysemy_model(corpus, table, lexicons.senses, phrases, seed, sample_cap, p_max, min_freq)


def train_two_stage(ts: TrainingSet, corpus: Sequence[Verbatim], extractor: FeatureExtractor,
                    types: Sequence[str], families: Sequence[str] = FAMILIES,
                    config: ForestConfig | None = None, seed: int = 0, threads: int = 1,
                    lexicon_fingerprint: str = "", run_config: dict | None = None) -> TwoStageModel:
    config = config or ForestConfig()
    verbatims = {v.id: v for v in corpus}
    stage1, stage2, schemas = {}, {}, {}
    for n in range(1, MAX_N + 1):
        s1, s2 = ts.stage1(n), ts.stage2(n)
        if not s1 or not s2:
            log.warning("no training data for %d-grams; inference will skip them", n)
            continue
        schema = FeatureSchema(n, extractor.table.dim, tuple(families))
        X1 = featurize(s1, verbatims, extractor, schema)
        stage1[n] = train_forest(X1, [s.label for s in s1], config, seed * 100 + n, STAGE1_CLASSES,
                                 schema.fingerprint(), threads)
        X2 = featurize(s2, verbatims, extractor, schema)
        stage2[n] = train_forest(X2, [s.type for s in s2], config, seed * 100 + 10 + n, tuple(types),
                                 schema.fingerprint(), threads)
        schemas[n] = schema
    if not stage1:
        raise ValueError("training set has no usable n-gram length")
    return TwoStageModel(stage1, stage2, schemas, tuple(types), extractor.table, extractor.polysemy,
                         lexicon_fingerprint, dict(run_config or {}))


@dataclass
class Extraction:
    verbatim_id: str
    start: int
    n: int
    phrase: str
    label: str
    type: str | None
    p_stage1: float
    p_stage2: float | None = None

    def row(self):
        return (self.verbatim_id, self.start, self.n, self.phrase, self.label,
                self.type or "-", f"{self.p_stage1:.6f}",
                "-" if self.p_stage2 is None else f"{self.p_stage2:.6f}")


def resolve_overlaps(cands: Sequence[tuple[float, Collocate]]) -> list[tuple[float, Collocate]]:
    """Keep the most probable of overlapping spans; ties favour longer, then leftmost."""
    kept: list[tuple[float, Collocate]] = []
    for p, c in sorted(cands, key=lambda pc: (-pc[0], -pc[1].n, pc[1].start)):
        if not any(c.overlaps(k.start, k.end) for _, k in kept):
            kept.append((p, c))
    kept.sort(key=lambda pc: pc[1].start)
    return kept


def infer(corpus: Sequence[Verbatim], model: TwoStageModel, onto: SeedOntology, stopnoise: StopNoiseLists,
          normalizer=None, tagger=None, emit_irrelevant: bool = True) -> list[Extraction]:
    """Run the two-stage classifier over every candidate collocate.

    When `normalizer` is given, verbatims are cleaned first. CONCEPT
    extractions within a verbatim never overlap.
    """
    if normalizer is not None:
        corpus = [normalizer.normalize(v)[0] for v in corpus]
    extractor = FeatureExtractor(model.embeddings, onto, model.polysemy, tagger)
    by_n: dict[int, list[tuple[Verbatim, Collocate]]] = defaultdict(list)
    skipped = Counter()
    for v in corpus:
        for c in generate_candidates(v, stopnoise):
            if c.n in model.stage1:
                by_n[c.n].append((v, c))
            else:
                skipped[c.n] += 1
    for n, k in skipped.items():
        log.warning("skipped %d candidate %d-grams: no model for that length", k, n)

    p_concept: dict[tuple[str, int, int], float] = {}
    for n, items in by_n.items():
        X = extractor.matrix(((c.start, c.n, v) for v, c in items), model.schemas[n])
        proba = model.stage1[n].predict_proba(X)
        ci = model.stage1[n].classes.index(CONCEPT)
        for (v, c), p in zip(items, proba[:, ci]):
            p_concept[(v.id, c.start, c.n)] = float(p)

    out: list[Extraction] = []
    verbatims = {v.id: v for v in corpus}
    per_verbatim: dict[str, list[tuple[float, Collocate]]] = defaultdict(list)
    rejected: list[tuple[float, Collocate]] = []
    for n, items in by_n.items():
        for v, c in items:
            p = p_concept[(v.id, c.start, c.n)]
            # argmax over (CONCEPT, IRRELEVANT); ties go to CONCEPT
            if p >= 1.0 - p:
                per_verbatim[v.id].append((p, c))
            else:
                rejected.append((p, c))

    accepted = {vid: resolve_overlaps(cands) for vid, cands in per_verbatim.items()}
    by_n2: dict[int, list[tuple[float, Collocate]]] = defaultdict(list)
    for vid, kept in accepted.items():
        for p, c in kept:
            by_n2[c.n].append((p, c))
    for n, items in by_n2.items():
        X = extractor.matrix(((c.start, c.n, verbatims[c.verbatim_id]) for _, c in items), model.schemas[n])
        proba = model.stage2[n].predict_proba(X)
        classes = model.stage2[n].classes
        for (p, c), row in zip(items, proba):
            j = int(np.argmax(row))
            out.append(Extraction(c.verbatim_id, c.start, c.n, c.phrase, CONCEPT, classes[j], p, float(row[j])))
    if emit_irrelevant:
        for p, c in rejected:
            out.append(Extraction(c.verbatim_id, c.start, c.n, c.phrase, IRRELEVANT, None, p, None))
    order = {v.id: i for i, v in enumerate(corpus)}
    out.sort(key=lambda e: (order[e.verbatim_id], e.start, e.n))
    return out


def write_extractions(path, extractions: Iterable[Extraction]) -> None:
    write_tsv(path, (e.row() for e in extractions))


def read_extractions(path) -> list[Extraction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            f = line.rstrip("\n").split("\t")
            if len(f) != 8:
                raise ValueError(f"{path}:{k}: expected 8 fields")
            out.append(Extraction(f[0], int(f[1]), int(f[2]), f[3], f[4], None if f[5] == "-" else f[5],
                                  float(f[6]), None if f[7] == "-" else float(f[7])))
    return out


# ---------------------------------------------------------------- active learning

def train_committee(X: np.ndarray, labels: Sequence[str], config: ForestConfig | None = None, seed: int = 0,
                    schema_hash: str = "", size: int = COMMITTEE_SIZE, threads: int = 1) -> list[ForestModel]:
    config = config or ForestConfig()
    return [train_forest(X, labels, config, seed * 1000 + k, STAGE1_CLASSES, schema_hash, threads)
            for k in range(size)]


def committee_votes(committee: Sequence[ForestModel], X: np.ndarray) -> np.ndarray:
    """Number of members predicting CONCEPT for each row."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    votes = np.zeros(len(X), dtype=np.int64)
    for m in committee:
        votes += np.array([p == CONCEPT for p in m.predict(X)], dtype=np.int64)
    return votes


def committee_disagreements(committee: Sequence[ForestModel], X: np.ndarray) -> list[int]:
    """Row indices on which the eight members split exactly four to four."""
    if len(committee) != COMMITTEE_SIZE:
        raise ValueError(f"committee must have exactly {COMMITTEE_SIZE} members, got {len(committee)}")
    if len(X) == 0:
        return []
    half = COMMITTEE_SIZE // 2
    return [int(i) for i in np.nonzero(committee_votes(committee, X) == half)[0]]


class LabelFile:
    """Labels looked up in a completed label file."""

    def __init__(self, path):
        self.labels = {s.key: s for s in read_labels(path, default_source="active-learning")}

    def __call__(self, requests: Sequence[LabeledSample], verbatims: Mapping[str, Verbatim]) -> list[LabeledSample]:
        missing = [r for r in requests if r.key not in self.labels]
        if missing:
            listing = "\n".join(f"  {r.phrase}\t{r.verbatim_id}\t{r.start}\t{r.n}" for r in missing[:50])
            raise LabelsMissing(missing, f"{len(missing)} selected samples have no label:\n{listing}")
        return [replace(self.labels[r.key], phrase=r.phrase, source="active-learning") for r in requests]


class LabelsMissing(ValueError):
    def __init__(self, missing, message):
        super().__init__(message)
        self.missing = missing


class PromptLabels:
    """Terminal prompt loop: shows the verbatim with the collocate bracketed."""

    def __init__(self, types: Sequence[str], input_fn=input, print_fn=print):
        self.types = list(types)
        self.input = input_fn
        self.print = print_fn

    def __call__(self, requests, verbatims):
        out = []
        keys = {t.lower(): t for t in self.types}
        hints = [f"{t.lower()}=type {t}" for t in self.types]
        # single-letter shortcuts only where no type already uses the letter
        for short, word, lab in (("i", "irrelevant", None), ("c", "concept", CONCEPT)):
            keys.setdefault(word, lab)
            if short not in keys:
                keys[short] = lab
                hints.append(f"{short}={word}")
            else:
                hints.append(word)
        hint = "/".join(hints)
        for r in requests:
            norms = verbatims[r.verbatim_id].norms
            shown = " ".join(norms[:r.start] + ["[" + " ".join(norms[r.start:r.start + r.n]) + "]"]
                             + norms[r.start + r.n:])
            self.print(shown)
            while True:
                ans = self.input(f"{hint}> ").strip().lower()
                if ans in keys:
                    break
            lab = keys[ans]
            if lab is None:
                out.append(replace(r, label=IRRELEVANT, type=None, source="active-learning"))
            elif lab == CONCEPT:
                out.append(replace(r, label=CONCEPT, type=None, source="active-learning"))
            else:
                out.append(replace(r, label=CONCEPT, type=lab, source="active-learning"))
        return out


@dataclass
class RoundReport:
    round: int
    n: int
    pool: int
    selected: int
    added: int


def active_learning_round(ts: TrainingSet, corpus: Sequence[Verbatim], extractor: FeatureExtractor,
                          stopnoise: StopNoiseLists, label_source, pool_size: int = 2000,
                          config: ForestConfig | None = None, seed: int = 0, round_no: int = 1,
                          families: Sequence[str] = FAMILIES, threads: int = 1) -> list[RoundReport]:
    """One query-by-committee round over each n-gram length present in `ts`.

    Unlabeled candidates are sampled from `corpus`, disagreement samples are
    labeled by `label_source` and appended to `ts` in place.
    """
    verbatims = {v.id: v for v in corpus}
    known = ts.keys()
    pool_by_n: dict[int, list[LabeledSample]] = defaultdict(list)
    for v in corpus:
        for c in generate_candidates(v, stopnoise):
            if (v.id, c.start, c.n) not in known:
                pool_by_n[c.n].append(LabeledSample(v.id, c.start, c.n, c.phrase, IRRELEVANT, None, "unlabeled"))
    rng = np.random.default_rng([seed, round_no])
    reports, requests = [], []
    for n in ts.ns:
        s1 = ts.stage1(n)
        if len({s.label for s in s1}) < 2:
            continue
        schema = FeatureSchema(n, extractor.table.dim, tuple(families))
        X = featurize(s1, verbatims, extractor, schema)
        committee = train_committee(X, [s.label for s in s1], config, seed * 10 + round_no * 100 + n,
                                    schema.fingerprint(), threads=threads)
        pool = pool_by_n.get(n, [])
        if len(pool) > pool_size:
            idx = np.sort(rng.choice(len(pool), size=pool_size, replace=False))
            pool = [pool[i] for i in idx]
        Xp = featurize(pool, verbatims, extractor, schema) if pool else np.zeros((0, schema.width))
        sel = [pool[i] for i in committee_disagreements(committee, Xp)]
        requests.extend(sel)
        reports.append(RoundReport(round_no, n, len(pool), len(sel), 0))
    labeled = label_source(requests, verbatims) if requests else []
    added = Counter()
    for s in labeled:
        if ts.add(replace(s, source="active-learning")):
            added[s.n] += 1
    for r in reports:
        r.added = added[r.n]
    return reports


def active_learning(ts: TrainingSet, corpus: Sequence[Verbatim], extractor: FeatureExtractor,
                    stopnoise: StopNoiseLists, label_source, rounds: int = 2, **kwargs) -> list[RoundReport]:
    reports = []
    for r in range(1, rounds + 1):
        reports.extend(active_learning_round(ts, corpus, extractor, stopnoise, label_source, round_no=r, **kwargs))
    return reports
