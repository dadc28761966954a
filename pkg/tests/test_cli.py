import subprocess
import sys

import pytest

from ontolearn.cli import run
from ontolearn.corpus import read_corpus
from ontolearn.pipeline import TrainingSet


def ok(*argv):
    assert run([str(a) for a in argv]) == 0, argv


def gold_labeler(gold_path):
    gold = {}
    for line in gold_path.read_text().splitlines():
        vid, _, _, phrase, t = line.split("\t")
        gold.setdefault(vid, {})[phrase] = t
    return lambda vid, phrase: gold.get(vid, {}).get(phrase, "IRRELEVANT")


@pytest.fixture(scope="module")
def flow(tmp_path_factory):
    d = tmp_path_factory.mktemp("flow")
    data = d / "data"
    lex = ["--lexicon-dir", data]
    ok("--seed", 3, "synth", "--output", data, "--size", 300, "--concepts-per-type", 10)
    ok("--seed", 3, "normalize", *lex, "--corpus", data / "corpus_raw.tsv", "--output", d / "norm.tsv",
       "--log", d / "norm_log.tsv", "--dim", 8, "--epochs", 1, "--min-count", 1)
    ok("--seed", 3, "embed", "--corpus", d / "norm.tsv", "--output", d / "emb.txt", "--dim", 8, "--epochs", 2,
       "--min-count", 1)
    ok("--seed", 3, "trainset", *lex, "--corpus", d / "norm.tsv", "--output", d / "ts.tsv", "--quota", 80,
       "--requests", d / "requests.tsv", "--min-freq", 20)
    ok("--seed", 3, "train", *lex, "--corpus", d / "norm.tsv", "--trainset", d / "ts.tsv",
       "--embeddings", d / "emb.txt", "--model", d / "model", "--n-trees", 3)
    ok("infer", *lex, "--corpus", data / "corpus_raw.tsv", "--model", d / "model", "--output", d / "ext.tsv")
    ok("eval", "--extractions", d / "ext.tsv", "--gold", data / "gold.tsv", "--output", d / "metrics.tsv")
    return d


def test_pipeline_writes_artifacts(flow):
    for name in ("norm.tsv", "norm_log.tsv", "emb.txt", "ts.tsv", "requests.tsv", "ext.tsv", "metrics.tsv",
                 "model/manifest.json"):
        assert (flow / name).stat().st_size > 0, name
    assert len(read_corpus(flow / "norm.tsv")) == 300
    row = (flow / "ext.tsv").read_text().splitlines()[0].split("\t")
    assert len(row) == 8 and row[4] in ("CONCEPT", "IRRELEVANT")
    metrics = (flow / "metrics.tsv").read_text().splitlines()
    assert metrics[1].startswith("stage1\toverall")
    assert all(line.endswith("\t?") for line in (flow / "requests.tsv").read_text().splitlines())


def test_repeated_training_is_byte_identical(flow):
    lex = ["--lexicon-dir", flow / "data"]
    ok("--seed", 3, "train", *lex, "--corpus", flow / "norm.tsv", "--trainset", flow / "ts.tsv",
       "--embeddings", flow / "emb.txt", "--model", flow / "model2", "--n-trees", 3)
    for f in sorted(p.name for p in (flow / "model").iterdir()):
        assert (flow / "model" / f).read_bytes() == (flow / "model2" / f).read_bytes(), f


def test_config_file_and_flag_precedence(flow, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n_trees = 2\nquota = 10\nmin_freq = 5\n")
    lex = ["--lexicon-dir", flow / "data"]
    ok("--config", cfg, "trainset", *lex, "--corpus", flow / "norm.tsv", "--output", tmp_path / "ts.tsv")
    ts = TrainingSet.load(tmp_path / "ts.tsv")
    assert all(len(ts.stage1(n)) <= 20 for n in ts.ns)
    ok("--config", cfg, "trainset", *lex, "--corpus", flow / "norm.tsv", "--output", tmp_path / "ts2.tsv",
       "--quota", 15)
    ts2 = TrainingSet.load(tmp_path / "ts2.tsv")
    assert max(len(ts2.stage1(n)) for n in ts2.ns) > 20
    cfg.write_text("no_such_key = 1\n")
    assert run(["--config", str(cfg), "embed", "--corpus", str(flow / "norm.tsv"),
                "--output", str(tmp_path / "e.txt")]) == 1


def test_active_learning_label_file(flow, tmp_path):
    lex = ["--lexicon-dir", flow / "data"]
    labels = tmp_path / "labels.tsv"
    labels.write_text("")
    requests = tmp_path / "requests.tsv"
    label_of = gold_labeler(flow / "data" / "gold.tsv")
    argv = ["--seed", 1, "active-learn", *lex, "--corpus", flow / "norm.tsv", "--trainset", flow / "ts.tsv",
            "--model", flow / "model", "--output", tmp_path / "ts_al.tsv", "--labels", labels,
            "--requests", requests, "--pool-size", 150, "--n-trees", 3]
    for attempt in range(4):
        code = run([str(a) for a in argv])
        if code == 0:
            break
        rows = [r.split("\t") for r in requests.read_text().splitlines()]
        assert rows and all(r[4] == "?" for r in rows)
        with labels.open("a") as fh:
            for phrase, vid, start, n, _ in rows:
                fh.write(f"{phrase}\t{vid}\t{start}\t{n}\t{label_of(vid, phrase)}\n")
    assert code == 0
    before = TrainingSet.load(flow / "ts.tsv")
    after = TrainingSet.load(tmp_path / "ts_al.tsv")
    assert len(after) > len(before)
    extra = [s for ss in after.samples.values() for s in ss if s.source == "active-learning"]
    assert len(after) - len(before) == len(extra)


def test_importance_modes(flow, tmp_path):
    lex = ["--lexicon-dir", flow / "data"]
    common = [*lex, "--corpus", flow / "norm.tsv", "--trainset", flow / "ts.tsv", "--model", flow / "model",
              "--n-trees", 2, "--families", "pos,word2vec,ontology"]
    ok("importance", "--mode", "drop-one", *common, "--output", tmp_path / "imp.tsv")
    rows = (tmp_path / "imp.tsv").read_text().splitlines()
    assert rows[0].startswith("baseline") and len(rows) == 4
    ok("importance", "--mode", "backward", *common, "--output", tmp_path / "trace.tsv")
    assert (tmp_path / "trace.tsv").read_text().splitlines()[-1].startswith("kept\t")


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        run(["train", "--corpus", "c", "--embeddings", "e", "--model", "m"])
    assert e.value.code != 0
    assert "--trainset" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        run(["frobnicate"])
    assert e.value.code != 0
    with pytest.raises(SystemExit):
        run(["embed", "--corpus", "x", "--output", "y", "--bogus"])


def test_module_errors_exit_one(tmp_path, capsys):
    assert run(["embed", "--corpus", str(tmp_path / "missing.tsv"), "--output", str(tmp_path / "e")]) == 1
    assert "ontolearn embed: error" in capsys.readouterr().err
    bad = tmp_path / "bad.tsv"
    bad.write_text("no tab here\n")
    assert run(["embed", "--corpus", str(bad), "--output", str(tmp_path / "e")]) == 1
    assert not (tmp_path / "e").exists()


def test_python_dash_m_entry_point():
    out = subprocess.run([sys.executable, "-m", "ontolearn", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "active-learn" in out.stdout
