import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_table
from ontolearn.embeddings import EmbeddingTable, average_embedding, cosine, lookup, train_skipgram


def topic_corpus(seed=0, size=3000):
    """Sentences drawn from four topics; 'bolt' and 'screw' share topic 0."""
    rng = np.random.default_rng(seed)
    topics = [[f"t{k}w{i}" for i in range(12)] for k in range(4)]
    out = []
    for _ in range(size):
        k = int(rng.integers(4))
        sent = list(rng.choice(topics[k], size=8))
        if k == 0:
            sent[int(rng.integers(8))] = "bolt" if rng.random() < 0.5 else "screw"
        out.append(sent)
    return out


@pytest.fixture(scope="module")
def topic_table():
    return train_skipgram(topic_corpus(), dim=20, window=3, epochs=3, min_count=5, seed=7)


def test_min_count_threshold():
    corpus = [["a"] * 5 + ["b"] * 4]
    table = train_skipgram(corpus, dim=4, min_count=5)
    assert "a" in table and "b" not in table
    with pytest.raises(ValueError):
        train_skipgram([["a"]], dim=4, min_count=5)
    with pytest.raises(ValueError):
        train_skipgram([], dim=4)


def test_self_cosine_is_one(topic_table):
    for w in topic_table.words[:10]:
        assert cosine(topic_table.lookup(w), topic_table.lookup(w)) == pytest.approx(1.0)


def test_shared_contexts_give_similar_vectors(topic_table):
    bolt = topic_table.lookup("bolt")
    target = cosine(bolt, topic_table.lookup("screw"))
    others = [w for w in topic_table.words if w not in ("bolt", "screw")]
    beaten = sum(target > cosine(bolt, topic_table.lookup(w)) for w in others)
    assert beaten / len(others) >= 0.95


def test_training_is_deterministic():
    corpus = topic_corpus(1, 300)
    a = train_skipgram(corpus, dim=8, epochs=2, min_count=2, seed=3)
    b = train_skipgram(corpus, dim=8, epochs=2, min_count=2, seed=3)
    assert a.words == b.words
    assert a.matrix.tobytes() == b.matrix.tobytes()
    c = train_skipgram(corpus, dim=8, epochs=2, min_count=2, seed=4)
    assert c.matrix.tobytes() != a.matrix.tobytes()


def test_lookup_and_average():
    t = make_table({"u": [1.0, 2.0], "v": [3.0, 0.0]})
    assert np.array_equal(lookup(t, "zzz"), [0.0, 0.0])
    assert np.array_equal(lookup(t, "u"), [1.0, 2.0])
    assert np.array_equal(average_embedding(t, "u"), [1.0, 2.0])
    assert np.array_equal(average_embedding(t, "u v"), [2.0, 1.0])
    assert np.array_equal(average_embedding(t, "x y"), [0.0, 0.0])
    assert np.array_equal(average_embedding(t, "u x"), [0.5, 1.0])
    with pytest.raises(ValueError):
        average_embedding(t, "")


def test_cosine_examples():
    assert cosine([1, 0], [0, 1]) == 0
    assert cosine([1, 1], [2, 2]) == pytest.approx(1.0)
    assert cosine([0, 0], [3, 1]) == 0
    with pytest.raises(ValueError):
        cosine([1, 0], [1, 0, 0])


def test_save_load_roundtrip(tmp_path):
    t = train_skipgram(topic_corpus(2, 200), dim=5, epochs=1, min_count=3, seed=1)
    t.save(tmp_path / "e.txt")
    header = (tmp_path / "e.txt").read_text().splitlines()[0]
    assert header == f"{len(t)} 5"
    back = EmbeddingTable.load(tmp_path / "e.txt")
    assert back.words == t.words
    assert back.matrix.tobytes() == t.matrix.tobytes()


def test_load_rejects_bad_rows(tmp_path):
    (tmp_path / "e.txt").write_text("1 3\nword 1.0 2.0\n")
    with pytest.raises(ValueError, match="e.txt:2"):
        EmbeddingTable.load(tmp_path / "e.txt")


vec = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3)


@given(vec, vec)
def test_cosine_bounded(u, v):
    assert abs(cosine(u, v)) <= 1 + 1e-9


@given(st.permutations(["u", "v", "x"]))
def test_average_order_free(words):
    t = make_table({"u": [1.0, 2.0], "v": [3.0, 0.5]})
    assert np.allclose(average_embedding(t, words), average_embedding(t, "u v x"))
