"""Precision/recall/F1 scoring and feature-family ablation."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import FeatureSchema
from .fileio import write_tsv
from .forest import ForestConfig, train_forest

CONCEPT = "CONCEPT"
IRRELEVANT = "IRRELEVANT"
ELIMINATION_EPS = 1e-6


@dataclass
class Metrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "Metrics":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        return cls(tp, fp, fn, p, r, f1_score(p, r))


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def score(predictions: Sequence, gold: Sequence, positive=CONCEPT) -> Metrics:
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold labels must be aligned")
    if not len(gold):
        raise ValueError("nothing to score")
    tp = sum(1 for p, g in zip(predictions, gold) if p == positive and g == positive)
    fp = sum(1 for p, g in zip(predictions, gold) if p == positive and g != positive)
    fn = sum(1 for p, g in zip(predictions, gold) if p != positive and g == positive)
    return Metrics.from_counts(tp, fp, fn)


def score_macro(predictions: Sequence, gold: Sequence, classes: Sequence) -> Metrics:
    """Macro-averaged P/R/F1 over `classes`; counts are summed across classes.

    Classes absent from both predictions and gold are left out of the average.
    """
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold labels must be aligned")
    if not len(gold):
        raise ValueError("nothing to score")
    per = [score(predictions, gold, c) for c in classes
           if any(p == c for p in predictions) or any(g == c for g in gold)]
    if not per:
        return Metrics()
    p = float(np.mean([m.precision for m in per]))
    r = float(np.mean([m.recall for m in per]))
    return Metrics(sum(m.tp for m in per), sum(m.fp for m in per), sum(m.fn for m in per),
                   p, r, float(np.mean([m.f1 for m in per])))


def score_per_n(predictions: Sequence, gold: Sequence, ns: Sequence[int], positive=CONCEPT) -> dict[int, Metrics]:
    groups: dict[int, tuple[list, list]] = defaultdict(lambda: ([], []))
    for p, g, n in zip(predictions, gold, ns):
        groups[n][0].append(p)
        groups[n][1].append(g)
    return {n: score(ps, gs, positive) for n, (ps, gs) in sorted(groups.items())}


@dataclass(frozen=True)
class GoldSpan:
    verbatim_id: str
    start: int
    n: int
    phrase: str
    type: str


def read_gold(path) -> list[GoldSpan]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            f = line.rstrip("\n").split("\t")
            if len(f) != 5:
                raise ValueError(f"{path}:{k}: expected '<verbatim_id>\\t<start>\\t<n>\\t<phrase>\\t<type>'")
            out.append(GoldSpan(f[0], int(f[1]), int(f[2]), f[3], f[4]))
    return out


@dataclass
class SpanEvaluation:
    stage1: Metrics
    stage1_per_n: dict[int, Metrics]
    stage2: Metrics
    stage2_per_n: dict[int, Metrics]
    # aligned (prediction, gold, n) triples behind the numbers
    pairs1: list = field(default_factory=list, repr=False)
    pairs2: list = field(default_factory=list, repr=False)


def align_spans(extractions: Iterable, gold: Iterable[GoldSpan], verbatim_ids: Iterable[str] | None = None):
    """Pair CONCEPT extractions with gold spans inside each verbatim.

    Matching is by phrase (a multiset per verbatim), so it is insensitive
    to token offsets shifted by normalization. Returns stage-1 triples
    (pred, gold, n) and stage-2 triples (pred_type, gold_type, n).
    """
    pred_by_v: dict[str, list] = defaultdict(list)
    for e in extractions:
        if e.label == CONCEPT:
            pred_by_v[e.verbatim_id].append(e)
    gold_by_v: dict[str, list[GoldSpan]] = defaultdict(list)
    for g in gold:
        gold_by_v[g.verbatim_id].append(g)
    vids = set(pred_by_v) | set(gold_by_v)
    if verbatim_ids is not None:
        vids &= set(verbatim_ids)
    pairs1, pairs2 = [], []
    for vid in sorted(vids):
        remaining: dict[str, list[GoldSpan]] = defaultdict(list)
        for g in gold_by_v.get(vid, []):
            remaining[g.phrase].append(g)
        for e in pred_by_v.get(vid, []):
            bucket = remaining.get(e.phrase)
            if bucket:
                g = bucket.pop(0)
                pairs1.append((CONCEPT, CONCEPT, e.n))
                pairs2.append((e.type, g.type, e.n))
            else:
                pairs1.append((CONCEPT, IRRELEVANT, e.n))
                pairs2.append((e.type, None, e.n))
        for bucket in remaining.values():
            for g in bucket:
                pairs1.append((IRRELEVANT, CONCEPT, g.n))
                pairs2.append((None, g.type, g.n))
    return pairs1, pairs2


def evaluate_extractions(extractions, gold: Sequence[GoldSpan], types: Sequence[str],
                         verbatim_ids: Iterable[str] | None = None) -> SpanEvaluation:
    pairs1, pairs2 = align_spans(extractions, gold, verbatim_ids)
    if not pairs1:
        raise ValueError("no gold spans or extractions to evaluate")
    p1, g1, n1 = zip(*pairs1)
    p2, g2, n2 = zip(*pairs2)
    per_n2 = defaultdict(lambda: ([], []))
    for p, g, n in pairs2:
        per_n2[n][0].append(p)
        per_n2[n][1].append(g)
    return SpanEvaluation(
        stage1=score(p1, g1),
        stage1_per_n=score_per_n(p1, g1, n1),
        stage2=score_macro(p2, g2, types),
        stage2_per_n={n: score_macro(ps, gs, types) for n, (ps, gs) in sorted(per_n2.items())},
        pairs1=pairs1,
        pairs2=pairs2,
    )


def write_metrics(path, ev: SpanEvaluation) -> None:
    rows = [("stage", "scope", "tp", "fp", "fn", "precision", "recall", "f1")]

    def row(stage, scope, m):
        return (stage, scope, m.tp, m.fp, m.fn, f"{m.precision:.4f}", f"{m.recall:.4f}", f"{m.f1:.4f}")

    rows.append(row("stage1", "overall", ev.stage1))
    rows.extend(row("stage1", f"N={n}", m) for n, m in ev.stage1_per_n.items())
    rows.append(row("stage2", "overall", ev.stage2))
    rows.extend(row("stage2", f"N={n}", m) for n, m in ev.stage2_per_n.items())
    write_tsv(path, rows)


# ------------------------------------------------------------------ ablation

@dataclass
class AblationData:
    """One train/eval split with named column blocks (one per feature family)."""

    blocks: Mapping[str, slice]
    X_train: np.ndarray
    y_train: Sequence[str]
    X_eval: np.ndarray
    y_eval: Sequence[str]

    @classmethod
    def from_schema(cls, schema: FeatureSchema, X_train, y_train, X_eval, y_eval) -> "AblationData":
        return cls({f: schema.columns(f) for f in schema.families}, X_train, y_train, X_eval, y_eval)

    def columns(self, families: Iterable[str]) -> np.ndarray:
        cols = [np.arange(self.blocks[f].start, self.blocks[f].stop) for f in families]
        return np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)


@dataclass
class ImportanceReport:
    baseline_f1: float
    delta_f1: dict[str, float]

    @property
    def ordering(self) -> list[str]:
        return sorted(self.delta_f1, key=lambda f: (-self.delta_f1[f], f))

    def rows(self):
        return [(f, f"{self.delta_f1[f]:.6f}") for f in self.ordering]


def ablation_f1(data: Sequence[AblationData], families: Sequence[str], config: ForestConfig | None = None,
                seed: int = 0, positive: str = CONCEPT) -> float:
    """Pooled F1 of forests retrained on the given families only."""
    preds, gold = [], []
    for k, d in enumerate(data):
        cols = d.columns(families)
        labels = sorted(set(d.y_train) | {positive})
        model = train_forest(d.X_train[:, cols], d.y_train, config, seed + k, labels)
        preds.extend(model.predict(d.X_eval[:, cols]))
        gold.extend(d.y_eval)
    return score(preds, gold, positive).f1


def _families(data: Sequence[AblationData], families):
    fams = list(families) if families is not None else list(data[0].blocks)
    if len(fams) < 2:
        raise ValueError("ablation needs at least two feature families")
    return fams


def drop_one_importance(data: Sequence[AblationData], families: Sequence[str] | None = None,
                        config: ForestConfig | None = None, seed: int = 0) -> ImportanceReport:
    fams = _families(data, families)
    base = ablation_f1(data, fams, config, seed)
    deltas = {f: base - ablation_f1(data, [g for g in fams if g != f], config, seed) for f in fams}
    return ImportanceReport(base, deltas)


@dataclass
class EliminationRound:
    round: int
    baseline_f1: float
    candidate_f1: dict[str, float]
    removed: str | None


def backward_elimination(data: Sequence[AblationData], families: Sequence[str] | None = None,
                         config: ForestConfig | None = None, seed: int = 0,
                         eps: float = ELIMINATION_EPS) -> tuple[list[str], list[EliminationRound]]:
    """Greedily drop the family whose removal improves F1 the most.

    Stops when no removal beats the current F1 by more than `eps`, or one
    family is left.
    """
    kept = _families(data, families)
    base = ablation_f1(data, kept, config, seed)
    trace = []
    while len(kept) > 1:
        cand = {f: ablation_f1(data, [g for g in kept if g != f], config, seed) for f in kept}
        best = max(kept, key=lambda f: (cand[f], -kept.index(f)))
        if cand[best] > base + eps:
            trace.append(EliminationRound(len(trace) + 1, base, cand, best))
            kept = [f for f in kept if f != best]
            base = cand[best]
        else:
            trace.append(EliminationRound(len(trace) + 1, base, cand, None))
            break
    return kept, trace


def write_importance(path, report: ImportanceReport) -> None:
    write_tsv(path, [("baseline", f"{report.baseline_f1:.6f}")] + report.rows())


def write_trace(path, kept: Sequence[str], trace: Sequence[EliminationRound]) -> None:
    rows = []
    for r in trace:
        cands = ",".join(f"{f}={v:.6f}" for f, v in r.candidate_f1.items())
        rows.append((r.round, f"{r.baseline_f1:.6f}", r.removed or "-", cands))
    rows.append(("kept", ",".join(kept)))
    write_tsv(path, rows)
