"""Synthetic end-to-end run: synth -> normalize -> embed -> trainset -> train -> infer -> eval.

    python3 scripts/end_to_end.py --size 10000 --dim 50 --out runs/e2e
"""

from __future__ import annotations

import argparse
import json
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ontolearn.corpus import build_stats
from ontolearn.embeddings import train_skipgram
from ontolearn.evaluate import GoldSpan, evaluate_extractions, write_metrics
from ontolearn.features import BaselineTagger, FeatureExtractor
from ontolearn.forest import ForestConfig
from ontolearn.lexicon import LexiconPaths, load_lexicons
from ontolearn.normalize import Normalizer
from ontolearn.pipeline import (build_training_set, fit_polysemy_for, frequent_unlabeled, infer,
                                phrase_label_samples, train_two_stage, write_extractions)
from ontolearn.synth import SynthSpec, generate_synthetic


@dataclass
class E2EConfig:
    size: int = 10_000
    concepts: int = 300
    holdout: float = 0.3
    noise: float = 0.05
    remark_rate: float = 0.7
    zipf_exponent: float = 0.5
    dim: int = 50
    epochs: int = 5
    min_count: int = 3
    quota: int = 1000
    # simulated expert: top frequent unlabeled phrases answered from the answer key
    manual_phrases: int = 80
    manual_per_phrase: int = 50
    min_freq: int = 20
    n_trees: int = 10
    seed: int = 1


@dataclass
class E2EResult:
    stage1_f1: float
    stage1_precision: float
    stage1_recall: float
    stage2_macro_f1: float
    stage1_per_n: dict = field(default_factory=dict)
    heldout_recovered: float = 0.0
    heldout_phrases: int = 0
    heldout_occurrence_recall: float = 0.0
    manual_labeled: list = field(default_factory=list)
    heldout_unlabeled_recovered: float = 0.0
    seconds: dict = field(default_factory=dict)


def run(cfg: E2EConfig, out: Path | None = None) -> E2EResult:
    clock: dict[str, float] = {}
    t = time.perf_counter()

    def lap(name):
        nonlocal t
        now = time.perf_counter()
        clock[name] = round(now - t, 2)
        t = now

    spec = SynthSpec(concepts_per_type=cfg.concepts // 3, holdout=cfg.holdout, misspell_rate=cfg.noise,
                     runon_rate=cfg.noise, whitespace_rate=cfg.noise, abbreviation_rate=cfg.noise,
                     remark_rate=cfg.remark_rate, zipf_exponent=cfg.zipf_exponent)
    sc = generate_synthetic(spec, cfg.size, cfg.seed)
    data = Path(out) / "data" if out else Path("/tmp") / f"ontolearn-e2e-{cfg.seed}"
    sc.write(data)
    lex = load_lexicons(LexiconPaths.from_dir(data))
    tagger = BaselineTagger.from_file(data / "pos_lexicon.tsv")
    train_raw, test_raw = sc.train(), sc.test()
    lap("synth")

    raw_emb = train_skipgram(train_raw, cfg.dim, epochs=cfg.epochs, min_count=cfg.min_count, seed=cfg.seed)
    train, _ = Normalizer(lex, build_stats(train_raw), raw_emb, train_raw).normalize_corpus(train_raw)
    lap("normalize")
    emb = train_skipgram(train, cfg.dim, epochs=cfg.epochs, min_count=cfg.min_count, seed=cfg.seed)
    lap("embed")
    ts = build_training_set(train, lex.ontology, lex.stopnoise, cfg.quota, cfg.seed)
    answers = {}
    if cfg.manual_phrases:
        key = {c.phrase: c.type for c in sc.concepts}
        # the labeling budget is split evenly over n-gram lengths, most frequent first
        per_n = defaultdict(list)
        for p, f in frequent_unlabeled(train, lex.ontology, lex.stopnoise, cfg.min_freq):
            per_n[len(p.split())].append((p, f))
        requests = [r for n in sorted(per_n) for r in per_n[n][:cfg.manual_phrases // 4]]
        answers = {p: key.get(p, "IRRELEVANT") for p, _ in requests}
        by_phrase = defaultdict(list)
        for smp in phrase_label_samples(train, lex.stopnoise, answers):
            by_phrase[smp.phrase].append(smp)
        rng = np.random.default_rng(cfg.seed)
        for phrase in sorted(by_phrase):
            pool = by_phrase[phrase]
            for i in sorted(rng.permutation(len(pool))[:cfg.manual_per_phrase]):
                ts.add(pool[i])
    lap("trainset")
    poly = fit_polysemy_for(train, emb, lex, lex.stopnoise, seed=cfg.seed)
    extractor = FeatureExtractor(emb, lex.ontology, poly, tagger)
    model = train_two_stage(ts, train, extractor, lex.ontology.types, config=ForestConfig(n_trees=cfg.n_trees),
                            seed=cfg.seed)
    lap("train")
    normalizer = Normalizer(lex, build_stats(test_raw), emb, test_raw)
    ext = infer(test_raw, model, lex.ontology, lex.stopnoise, normalizer, tagger)
    lap("infer")

    test_ids = {v.id for v in test_raw}
    gold = [GoldSpan(*g) for g in sc.gold if g[0] in test_ids]
    ev = evaluate_extractions(ext, gold, lex.ontology.types, test_ids)
    held = {c.phrase for c in sc.concepts if c.heldout}
    held_in_test = {g.phrase for g in gold if g.phrase in held}
    found = {e.phrase for e in ext if e.label == "CONCEPT"} & held_in_test
    predicted = {(e.verbatim_id, e.phrase) for e in ext if e.label == "CONCEPT"}
    held_gold = [g for g in gold if g.phrase in held]
    held_hits = sum((g.verbatim_id, g.phrase) in predicted for g in held_gold)
    unlabeled_held = held_in_test - set(answers)
    lap("eval")
    if out:
        write_extractions(Path(out) / "extractions.tsv", ext)
        write_metrics(Path(out) / "metrics.tsv", ev)
    return E2EResult(ev.stage1.f1, ev.stage1.precision, ev.stage1.recall, ev.stage2.f1,
                     {n: m.f1 for n, m in ev.stage1_per_n.items()},
                     len(found) / max(1, len(held_in_test)), len(held_in_test),
                     held_hits / max(1, len(held_gold)),
                     sorted(f"{p}={t}" for p, t in answers.items()),
                     len(found & unlabeled_held) / max(1, len(unlabeled_held)), clock)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    for f, v in asdict(E2EConfig()).items():
        p.add_argument("--" + f.replace("_", "-"), dest=f, type=type(v), default=v)
    p.add_argument("--out")
    args = vars(p.parse_args())
    out = args.pop("out")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
    res = run(E2EConfig(**args), Path(out) if out else None)
    print(json.dumps(asdict(res), indent=2))


if __name__ == "__main__":
    main()
