import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_table
from ontolearn.corpus import Verbatim
from ontolearn.features import (FAMILIES, N_TAGS, TAG_INDEX, BaselineTagger, ExternalTagger, FeatureError,
                                FeatureExtractor, FeatureSchema, PolysemyModel, coarse_tag, context_feature,
                                fit_polysemy, fit_polysemy_model, kmeans, linguistic_features,
                                ontology_feature, polysemy_feature)
from ontolearn.lexicon import SeedOntology, SenseLexicon
from ontolearn.seedtag import ConceptSpan


def v(text, vid="v"):
    return Verbatim.from_text(vid, text)


def decode(block):
    rows = block.reshape(-1, N_TAGS)
    assert np.all(rows.sum(axis=1) == 1)
    return [list(TAG_INDEX)[int(np.argmax(r))] for r in rows]


def test_baseline_tagger_rules():
    tagger = BaselineTagger({"engine": "NOUN"})
    assert tagger(v("engine replaced")) == ["NOUN", "VERB"]
    assert tagger(v("100 flibbet quickly the")) == ["NUM", "NOUN", "ADV", "DET"]


def test_external_tagger(tmp_path):
    p = tmp_path / "tags.tsv"
    p.write_text("a\tNN VBD\nb\tNN\n")
    tagger = ExternalTagger.from_file(p)
    assert tagger(v("engine replaced", "a")) == ["NOUN", "VERB"]
    with pytest.raises(FeatureError, match="verbatim b"):
        tagger(v("two tokens", "b"))
    with pytest.raises(FeatureError):
        tagger(v("x", "missing"))
    assert ExternalTagger.from_file(p, fallback=BaselineTagger())(v("x", "missing")) == ["NOUN"]
    assert coarse_tag("JJ") == "ADJ" and coarse_tag("???") == "X"


def test_linguistic_features_edges():
    tags = ["DET", "NOUN", "VERB", "ADJ"]
    f = linguistic_features(0, 1, tags, [])
    assert decode(f["pos"]) == ["DET"]
    assert decode(f["left3_pos"]) == ["NONE"] * 3
    assert decode(f["right3_pos"]) == ["NOUN", "VERB", "ADJ"]
    assert decode(f["left_concept_pos"]) == ["NONE"] and decode(f["right_concept_pos"]) == ["NONE"]
    # tokens [a, b, C, d]
    f = linguistic_features(2, 1, tags, [])
    assert decode(f["left3_pos"]) == ["NONE", "DET", "NOUN"]
    assert decode(f["right3_pos"]) == ["ADJ", "NONE", "NONE"]


def test_concept_pos_uses_nearest_span_first_token():
    tags = ["ADJ", "NOUN", "VERB", "DET", "NUM", "NOUN"]
    spans = [ConceptSpan(0, 2, "x y", "A"), ConceptSpan(4, 2, "u w", "B")]
    f = linguistic_features(2, 1, tags, spans)
    assert decode(f["left_concept_pos"]) == ["ADJ"]
    assert decode(f["right_concept_pos"]) == ["NUM"]
    # overlapping spans are not neighbours
    f = linguistic_features(1, 2, tags, spans)
    assert decode(f["left_concept_pos"]) == ["NONE"]


def test_context_feature_examples():
    t = make_table({"a": [1.0, 0.0], "b": [0.0, 1.0], "c": [2.0, 2.0], "d": [4.0, 0.0]})
    assert np.array_equal(context_feature(0, 2, ["x", "y"], t), np.zeros(4))
    assert np.allclose(context_feature(2, 1, ["a", "b", "x"], t), [0.5, 0.5, 0.0, 0.0])
    norms = ["a", "b", "c", "x", "d", "a", "b", "c"]
    expected = np.concatenate([np.mean([[1, 0], [0, 1], [2, 2]], axis=0), np.mean([[4, 0], [1, 0], [0, 1]], axis=0)])
    assert np.allclose(context_feature(3, 1, norms, t), expected)
    # absent neighbours still count as zero vectors
    assert np.allclose(context_feature(1, 1, ["zz", "x", "a"], t), [0, 0, 1, 0])


def test_ontology_feature_examples():
    onto = SeedOntology({"engine": "A", "module": "A"})
    assert list(ontology_feature("engine control module", onto)) == [1, 0, 1]
    assert list(ontology_feature("x y", onto)) == [0, 0]
    assert list(ontology_feature("engine", onto)) == [1]


def test_schema_widths():
    assert FeatureSchema(2, 100).width == 632
    assert FeatureSchema(1, 4, ("word2vec",)).width == 4
    s = FeatureSchema(3, 10, ("ontology", "pos"))
    assert s.families == ("pos", "ontology")
    assert s.columns("ontology") == slice(39, 42)
    assert FeatureSchema.from_dict(s.to_dict()) == s
    assert s.fingerprint() != FeatureSchema(3, 10).fingerprint()
    with pytest.raises(FeatureError):
        FeatureSchema(1, 4, ("bogus",))


def brute_two_means(X):
    best = None
    for mask in itertools.product([0, 1], repeat=len(X)):
        m = np.array(mask, bool)
        if m.all() or not m.any():
            continue
        sse = ((X[m] - X[m].mean(0)) ** 2).sum() + ((X[~m] - X[~m].mean(0)) ** 2).sum()
        if best is None or sse < best[0] - 1e-12:
            best = (sse, sorted(map(tuple, [X[m].mean(0), X[~m].mean(0)])))
    return best


def test_kmeans_fixture_matches_brute_force():
    X = np.array([[0, 0], [0, 1], [10, 10], [10, 11]], float)
    sse, cents = brute_two_means(X)
    assert cents == [(0.0, 0.5), (10.0, 10.5)]
    for seed in range(10):
        c, labels, hist = kmeans(X, 2, np.random.default_rng(seed))
        assert sorted(map(tuple, c)) == cents
        assert hist[-1] == sse


def test_kmeans_degenerate_cases():
    X = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]])
    c, _, _ = kmeans(X, 1, np.random.default_rng(0))
    assert np.allclose(c[0], X.mean(0))
    c, _, hist = kmeans(X, 3, np.random.default_rng(0))
    assert hist[-1] == 0 and sorted(map(tuple, c)) == sorted(map(tuple, X))
    c, _, _ = kmeans(np.ones((5, 2)), 4, np.random.default_rng(0))
    assert len(c) == 1
    with pytest.raises(ValueError):
        kmeans(np.zeros((0, 2)), 2, np.random.default_rng(0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_kmeans_objective_non_increasing(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3)) + rng.integers(0, 3, size=(40, 1)) * 4
    _, _, hist = kmeans(X, k, np.random.default_rng(seed))
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
    c1, _, _ = kmeans(X, k, np.random.default_rng(seed))
    c2, _, _ = kmeans(X, k, np.random.default_rng(seed))
    assert np.array_equal(c1, c2)


def polysemy_corpus():
    texts = ["a b pump c d"] * 5 + ["x y pump z w"] * 5 + ["nothing here"]
    return [v(t, str(i)) for i, t in enumerate(texts)]


def polysemy_table():
    return make_table({"a": [1.0], "b": [1.0], "c": [1.0], "d": [1.0],
                       "x": [-1.0], "y": [-1.0], "z": [-1.0], "w": [-1.0]})


def test_fit_polysemy_two_senses():
    corpus, t = polysemy_corpus(), polysemy_table()
    cents = fit_polysemy(corpus, t, SenseLexicon({"pump": 2}), "pump", seed=1)
    assert sorted(map(tuple, cents)) == [(-1.0, -1.0), (1.0, 1.0)]
    one = fit_polysemy(corpus, t, SenseLexicon({}), "pump", seed=1)
    assert np.allclose(one, [[0.0, 0.0]])
    with pytest.raises(FeatureError):
        fit_polysemy(corpus, t, SenseLexicon({}), "absent", seed=1)


def test_polysemy_feature_picks_nearest_and_falls_back():
    t = make_table({"a": [1.0], "b": [1.0]})
    model = PolysemyModel({"pump": np.array([[0.0, 0.0], [10.0, 10.0]])})
    assert np.array_equal(polysemy_feature(1, 1, v("a pump b"), model, t), [0.0, 0.0])
    model = PolysemyModel({"pump": np.array([[5.0, 5.0]])})
    assert np.array_equal(polysemy_feature(1, 1, v("a pump b"), model, t), [5.0, 5.0])
    assert np.array_equal(polysemy_feature(0, 1, v("hose"), model, t), [0.0, 0.0])


def test_polysemy_model_roundtrip_and_min_freq(tmp_path):
    corpus, t = polysemy_corpus(), polysemy_table()
    model = fit_polysemy_model(corpus, t, SenseLexicon({"pump": 2}), ["pump", "nothing", "zzz"], seed=3, min_freq=2)
    assert set(model.centroids) == {"pump"}
    model.save(tmp_path / "p.tsv")
    back = PolysemyModel.load(tmp_path / "p.tsv")
    assert np.array_equal(back.centroids["pump"], model.centroids["pump"])


def test_extractor_full_vector():
    t = make_table({w: [float(i), 1.0] for i, w in enumerate("the engine control module is replaced".split())})
    onto = SeedOntology({"engine control module": "A", "engine": "A"})
    ex = FeatureExtractor(t, onto, tagger=BaselineTagger({"engine": "NOUN"}))
    verb = v("the engine control module is replaced")
    schema = FeatureSchema(2, 2)
    x = ex.assemble(4, 2, verb, schema)
    assert len(x) == schema.width
    for fam, off, w in schema.blocks:
        if fam.endswith("pos"):
            decode(x[off:off + w])
    assert decode(x[schema.columns("left_concept_pos")]) == ["NOUN"]
    assert np.allclose(x[schema.columns("word2vec")], [4.5, 1.0])
    assert list(x[schema.columns("ontology")]) == [0, 0]
    assert np.array_equal(x, ex.assemble(4, 2, verb, schema))
    with pytest.raises(FeatureError):
        ex.assemble(4, 1, verb, schema)
    with pytest.raises(FeatureError):
        ex.assemble(4, 2, verb, FeatureSchema(2, 3))
    assert ex.matrix([], schema).shape == (0, schema.width)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from("the engine pump hose 12 leaking replaced".split()), min_size=1, max_size=9),
       st.data())
def test_every_assembled_vector_has_valid_one_hots(words, data):
    verb = v(" ".join(words))
    n = data.draw(st.integers(1, min(4, len(verb))))
    start = data.draw(st.integers(0, len(verb) - n))
    t = make_table({"engine": [1.0, 0.0], "pump": [0.0, 1.0]})
    ex = FeatureExtractor(t, SeedOntology({"engine": "A", "pump hose": "A"}))
    schema = FeatureSchema(n, 2, FAMILIES)
    x = ex.assemble(start, n, verb, schema)
    assert len(x) == schema.width
    for fam, off, w in schema.blocks:
        if fam.endswith("pos"):
            decode(x[off:off + w])
