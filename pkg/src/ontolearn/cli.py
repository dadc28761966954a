"""Command-line interface.

Subcommands: synth, normalize, embed, trainset, train, infer, active-learn,
eval, importance. Hyperparameters come from RunConfig defaults, then a
`--config` file, then flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, read_config_file
from .corpus import build_stats, read_corpus, write_corpus
from .embeddings import EmbeddingTable, train_skipgram
from .evaluate import (AblationData, backward_elimination, drop_one_importance, evaluate_extractions,
                       read_gold, write_importance, write_metrics, write_trace)
from .features import FAMILIES, BaselineTagger, ExternalTagger, FeatureExtractor, FeatureSchema
from .fileio import write_tsv
from .forest import ForestConfig
from .lexicon import LexiconPaths, load_lexicons
from .normalize import Normalizer
from .pipeline import (LabelFile, LabelsMissing, PromptLabels, TrainingSet, TwoStageModel, active_learning,
                       build_training_set, featurize, fit_polysemy_for, frequent_unlabeled, infer,
                       phrase_label_samples, read_extractions, read_labels, read_phrase_labels,
                       train_two_stage, write_extractions,
                       write_label_requests)
from .synth import SynthSpec, generate_synthetic

log = logging.getLogger("ontolearn")


class UsageError(Exception):
    pass


def _lexicon_args(p):
    g = p.add_argument_group("lexicons")
    g.add_argument("--lexicon-dir", help="directory holding dictionary.txt, ontology.tsv, ...")
    g.add_argument("--dictionary")
    g.add_argument("--ontology")
    g.add_argument("--abbreviations")
    g.add_argument("--senses")
    g.add_argument("--stop-words")
    g.add_argument("--noise-words")
    g.add_argument("--pos-lexicon", help="TSV <word>\\t<tag> for the baseline tagger")
    g.add_argument("--tags", help="external tag file <verbatim_id>\\t<tag_1> <tag_2> ...")


def _hyper_args(p, *names):
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ontolearn", description="Ontology learning from short verbatims.")
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic corpus with gold annotations")
    p.add_argument("--output", required=True)
    p.add_argument("--size", type=int, default=10_000)
    p.add_argument("--concepts-per-type", type=int, default=100)
    p.add_argument("--holdout", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=None, help="set all four noise rates at once")
    for rate in ("misspell", "runon", "whitespace", "abbreviation"):
        p.add_argument(f"--{rate}-rate", type=float, default=0.05)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--remark-rate", type=float, default=0.7, help="share of verbatims with concept-free remarks")
    p.add_argument("--zipf-exponent", type=float, default=0.5, help="skew of concept popularity")

    p = sub.add_parser("normalize", help="repair spelling, run-ons, split words and abbreviations")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--log", help="correction log TSV")
    p.add_argument("--embeddings", help="vectors trained on the raw corpus (trained on the fly if absent)")
    _lexicon_args(p)
    _hyper_args(p, "dim", "window", "epochs", "negative", "min_count", "abbrev_scope")

    p = sub.add_parser("embed", help="train skip-gram embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    _hyper_args(p, "dim", "window", "epochs", "negative", "min_count")

    p = sub.add_parser("trainset", help="weakly label collocates with the seed ontology")
    p.add_argument("--corpus", required=True, help="normalized corpus")
    p.add_argument("--output", required=True)
    p.add_argument("--labels", help="manually labeled samples to add")
    p.add_argument("--phrase-labels", help="completed label-request file (labels every occurrence)")
    p.add_argument("--requests", help="write frequent unlabeled phrases here for manual labeling")
    _lexicon_args(p)
    _hyper_args(p, "quota", "min_freq")

    p = sub.add_parser("train", help="train the two-stage forests")
    p.add_argument("--corpus", required=True, help="normalized corpus")
    p.add_argument("--trainset", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True, help="output bundle directory")
    _lexicon_args(p)
    _hyper_args(p, "n_trees", "min_samples_split", "p_max", "sample_cap", "polysemy_min_freq", "families")

    p = sub.add_parser("infer", help="extract and type concepts")
    p.add_argument("--corpus", required=True, help="raw corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--normalized", action="store_true", help="input is already normalized")
    p.add_argument("--concepts-only", action="store_true", help="omit IRRELEVANT rows")
    _lexicon_args(p)
    _hyper_args(p, "abbrev_scope")

    p = sub.add_parser("active-learn", help="query-by-committee rounds")
    p.add_argument("--corpus", required=True, help="normalized corpus")
    p.add_argument("--trainset", required=True)
    p.add_argument("--model", required=True, help="bundle providing embeddings and polysemy centroids")
    p.add_argument("--output", required=True, help="augmented training set")
    p.add_argument("--labels", help="label file (batch mode); interactive prompts otherwise")
    p.add_argument("--requests", help="where to write unlabeled selections in batch mode")
    _lexicon_args(p)
    _hyper_args(p, "rounds", "pool_size", "n_trees", "families")

    p = sub.add_parser("eval", help="score extractions against gold spans")
    p.add_argument("--extractions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--corpus", help="restrict scoring to the verbatims of this corpus")
    p.add_argument("--types", default="A,B,C")

    p = sub.add_parser("importance", help="feature-family ablation")
    p.add_argument("--mode", choices=("drop-one", "backward"), required=True)
    p.add_argument("--corpus", required=True, help="normalized corpus")
    p.add_argument("--trainset", required=True)
    p.add_argument("--model", required=True, help="bundle providing embeddings and polysemy centroids")
    p.add_argument("--output", required=True)
    _lexicon_args(p)
    _hyper_args(p, "n_trees", "families", "eval_fraction")
    return parser


def _option_names(parser: argparse.ArgumentParser) -> set[str]:
    names = set()
    for action in parser._actions:
        names.add(action.dest)
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                names |= _option_names(sub)
    return names


def _config(args, known: set[str] = frozenset()) -> RunConfig:
    cfg = RunConfig()
    file_values = read_config_file(args.config) if args.config else {}
    keys = set(RunConfig.keys())
    unknown = sorted(k for k in file_values if k.replace("-", "_") not in keys | known)
    if unknown:
        raise ValueError(f"{args.config}: unknown configuration keys {unknown}")
    cfg.update({k: v for k, v in file_values.items() if k.replace("-", "_") in keys})
    for k, v in file_values.items():
        k = k.replace("-", "_")
        if k not in keys and hasattr(args, k) and getattr(args, k) is None:
            setattr(args, k, v)
    cfg.update({k: getattr(args, k) for k in keys if hasattr(args, k) and getattr(args, k) is not None})
    return cfg


def _lexicons(args):
    paths = LexiconPaths.from_dir(args.lexicon_dir) if args.lexicon_dir else LexiconPaths()
    for name in ("dictionary", "ontology", "abbreviations", "senses", "stop_words", "noise_words"):
        if getattr(args, name, None):
            setattr(paths, name, getattr(args, name))
    return load_lexicons(paths)


def _tagger(args):
    pos_lex = args.pos_lexicon
    if not pos_lex and args.lexicon_dir and (Path(args.lexicon_dir) / "pos_lexicon.tsv").exists():
        pos_lex = Path(args.lexicon_dir) / "pos_lexicon.tsv"
    base = BaselineTagger.from_file(pos_lex) if pos_lex else BaselineTagger()
    return ExternalTagger.from_file(args.tags, fallback=base) if args.tags else base


def _forest_config(cfg: RunConfig) -> ForestConfig:
    return ForestConfig(n_trees=cfg.n_trees, min_samples_split=cfg.min_samples_split)


def cmd_synth(args, cfg):
    spec = SynthSpec(concepts_per_type=args.concepts_per_type, holdout=args.holdout,
                     test_fraction=args.test_fraction, remark_rate=args.remark_rate,
                     zipf_exponent=args.zipf_exponent)
    for rate in ("misspell", "runon", "whitespace", "abbreviation"):
        value = args.noise if args.noise is not None else getattr(args, f"{rate}_rate")
        setattr(spec, f"{rate}_rate", value)
    sc = generate_synthetic(spec, args.size, cfg.seed)
    sc.write(args.output)
    log.info("wrote %d verbatims, %d gold spans to %s", len(sc.raw), len(sc.gold), args.output)


def _embeddings(corpus, cfg):
    return train_skipgram(corpus, cfg.dim, cfg.window, cfg.epochs, cfg.negative, cfg.min_count, cfg.seed)


def cmd_normalize(args, cfg):
    lex = _lexicons(args)
    corpus = read_corpus(args.corpus)
    if not corpus:
        raise ValueError(f"{args.corpus}: empty corpus")
    stats = build_stats(corpus)
    emb = EmbeddingTable.load(args.embeddings) if args.embeddings else _embeddings(corpus, cfg)
    normalizer = Normalizer(lex, stats, emb, corpus, cfg.abbrev_scope)
    out, logs = normalizer.normalize_corpus(corpus)
    write_corpus(args.output, out)
    if args.log:
        write_tsv(args.log, (row for lg in logs for row in lg.rows()))
    log.info("normalized %d verbatims, %d corrections", len(out), sum(len(lg) for lg in logs))


def cmd_embed(args, cfg):
    corpus = read_corpus(args.corpus)
    _embeddings(corpus, cfg).save(args.output)


def cmd_trainset(args, cfg):
    lex = _lexicons(args)
    corpus = read_corpus(args.corpus)
    ts = build_training_set(corpus, lex.ontology, lex.stopnoise, cfg.quota, cfg.seed)
    if args.labels:
        for s in read_labels(args.labels):
            ts.add(s)
    if args.phrase_labels:
        for s in phrase_label_samples(corpus, lex.stopnoise, read_phrase_labels(args.phrase_labels)):
            ts.add(s)
    ts.save(args.output)
    if args.requests:
        write_label_requests(args.requests, frequent_unlabeled(corpus, lex.ontology, lex.stopnoise, cfg.min_freq))


def _extractor(args, lex, emb, poly):
    return FeatureExtractor(emb, lex.ontology, poly, _tagger(args))


def cmd_train(args, cfg):
    lex = _lexicons(args)
    corpus = read_corpus(args.corpus)
    emb = EmbeddingTable.load(args.embeddings)
    cfg.dim = emb.dim
    ts = TrainingSet.load(args.trainset)
    poly = fit_polysemy_for(corpus, emb, lex, lex.stopnoise, seed=cfg.seed, sample_cap=cfg.sample_cap,
                            p_max=cfg.p_max, min_freq=cfg.polysemy_min_freq)
    model = train_two_stage(ts, corpus, _extractor(args, lex, emb, poly), lex.ontology.types, cfg.families,
                            _forest_config(cfg), cfg.seed, cfg.threads, lex.fingerprint, cfg.as_dict())
    model.save(args.model)


def cmd_infer(args, cfg):
    lex = _lexicons(args)
    model = TwoStageModel.load(args.model)
    if lex.fingerprint != model.lexicon_fingerprint:
        log.warning("lexicons differ from the ones the model was trained with")
    corpus = read_corpus(args.corpus)
    normalizer = None
    if not args.normalized and corpus:
        normalizer = Normalizer(lex, build_stats(corpus), model.embeddings, corpus, cfg.abbrev_scope)
    ext = infer(corpus, model, lex.ontology, lex.stopnoise, normalizer, _tagger(args),
                emit_irrelevant=not args.concepts_only)
    write_extractions(args.output, ext)


def cmd_active_learn(args, cfg):
    lex = _lexicons(args)
    corpus = read_corpus(args.corpus)
    model = TwoStageModel.load(args.model)
    ts = TrainingSet.load(args.trainset)
    source = LabelFile(args.labels) if args.labels else PromptLabels(lex.ontology.types)
    extractor = _extractor(args, lex, model.embeddings, model.polysemy)
    try:
        reports = active_learning(ts, corpus, extractor, lex.stopnoise, source, rounds=cfg.rounds,
                                  pool_size=cfg.pool_size, config=_forest_config(cfg), seed=cfg.seed,
                                  families=cfg.families, threads=cfg.threads)
    except LabelsMissing as e:
        if args.requests:
            write_tsv(args.requests, ((s.phrase, s.verbatim_id, s.start, s.n, "?") for s in e.missing))
        raise
    ts.save(args.output)
    for r in reports:
        log.info("round %d n=%d pool=%d selected=%d added=%d", r.round, r.n, r.pool, r.selected, r.added)


def cmd_eval(args, cfg):
    ext = read_extractions(args.extractions)
    gold = read_gold(args.gold)
    ids = [v.id for v in read_corpus(args.corpus)] if args.corpus else None
    ev = evaluate_extractions(ext, gold, args.types.split(","), ids)
    write_metrics(args.output, ev)
    print(f"stage1 P={ev.stage1.precision:.3f} R={ev.stage1.recall:.3f} F1={ev.stage1.f1:.3f}; "
          f"stage2 macro-F1={ev.stage2.f1:.3f}")


def ablation_data(ts: TrainingSet, corpus, extractor, families, eval_fraction: float, seed: int):
    """Per-n train/eval splits of the stage-1 samples, split by verbatim."""
    verbatims = {v.id: v for v in corpus}
    ids = sorted({s.verbatim_id for ss in ts.samples.values() for s in ss})
    rng = np.random.default_rng(seed)
    held = set(rng.choice(ids, size=max(1, int(round(eval_fraction * len(ids)))), replace=False)) if ids else set()
    data = []
    for n in ts.ns:
        schema = FeatureSchema(n, extractor.table.dim, tuple(families))
        tr = [s for s in ts.stage1(n) if s.verbatim_id not in held]
        ev = [s for s in ts.stage1(n) if s.verbatim_id in held]
        if not tr or not ev:
            continue
        data.append(AblationData.from_schema(
            schema, featurize(tr, verbatims, extractor, schema), [s.label for s in tr],
            featurize(ev, verbatims, extractor, schema), [s.label for s in ev]))
    if not data:
        raise ValueError("training set too small for an evaluation split")
    return data


def cmd_importance(args, cfg):
    lex = _lexicons(args)
    corpus = read_corpus(args.corpus)
    model = TwoStageModel.load(args.model)
    ts = TrainingSet.load(args.trainset)
    extractor = _extractor(args, lex, model.embeddings, model.polysemy)
    data = ablation_data(ts, corpus, extractor, cfg.families, cfg.eval_fraction, cfg.seed)
    if args.mode == "drop-one":
        write_importance(args.output, drop_one_importance(data, list(cfg.families), _forest_config(cfg), cfg.seed))
    else:
        kept, trace = backward_elimination(data, list(cfg.families), _forest_config(cfg), cfg.seed)
        write_trace(args.output, kept, trace)


COMMANDS = {
    "synth": cmd_synth,
    "normalize": cmd_normalize,
    "embed": cmd_embed,
    "trainset": cmd_trainset,
    "train": cmd_train,
    "infer": cmd_infer,
    "active-learn": cmd_active_learn,
    "eval": cmd_eval,
    "importance": cmd_importance,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args, _option_names(parser))
        COMMANDS[args.command](args, cfg)
    except (ValueError, OSError, KeyError) as e:
        print(f"ontolearn {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
