import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from ontolearn.forest import ForestConfig, ForestModel, _best_split, train_forest, train_tree

EXACT = ForestConfig(n_trees=1, bootstrap=False, mtry=None)


def gini_oracle(x, y):
    """Brute force over every midpoint threshold of one feature."""
    vals = np.unique(x)
    best = None
    for a, b in zip(vals, vals[1:]):
        t = (a + b) / 2
        imp = 0.0
        for side in (y[x <= t], y[x > t]):
            p = np.bincount(side, minlength=y.max() + 1) / len(side)
            imp += len(side) / len(y) * (1 - (p ** 2).sum())
        if best is None or imp < best[0] - 1e-12:
            best = (imp, t)
    return best


def test_one_dimensional_example():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    y = np.array([0, 0, 1, 1])
    assert _best_split(X, y, np.arange(4), np.array([0]), 2) == (0, 5.5)
    assert gini_oracle(X[:, 0], y)[1] == 5.5
    tree = train_tree(X, y, np.random.default_rng(0), mtry=1)
    assert tree.n_nodes == 3
    assert np.array_equal(tree.predict_proba(X).argmax(1), y)


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 2)), min_size=2, max_size=15))
# thresholds 0.5 and 1.5 tie exactly at weighted Gini 1/3
@example(rows=[(0, 0), (0, 1), (1, 0), (1, 1), (1, 1), (1, 1), (2, 1), (2, 1)])
def test_split_matches_gini_oracle(rows):
    x = np.array([r[0] for r in rows], float)
    y = np.array([r[1] for r in rows])
    got = _best_split(x[:, None], y, np.arange(len(y)), np.array([0]), 3)
    want = gini_oracle(x, y)
    if want is None:
        assert got is None
    else:
        assert got[1] == want[1]


def test_tie_breaks_to_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert _best_split(X, np.array([0, 1]), np.arange(2), np.array([0, 1]), 2)[0] == 0


def test_xor_is_learned_exactly():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
    y = ["a", "b", "b", "a"]
    model = train_forest(X, y, EXACT)
    assert model.predict(X) == y


def test_forest_single_tree_equals_cart():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 4))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    model = train_forest(X, y.tolist(), EXACT, seed=3, classes=[0, 1])
    tree = train_tree(X, y, np.random.default_rng(0), mtry=None)
    Xt = rng.normal(size=(30, 4))
    assert np.array_equal(model.predict_proba(Xt), tree.predict_proba(Xt))


def test_errors():
    with pytest.raises(ValueError):
        train_forest(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        train_forest(np.zeros((2, 2)), ["a", "z"], classes=["a", "b"])
    with pytest.raises(ValueError):
        train_forest(np.zeros((2, 2)), ["a", "b"], ForestConfig(n_trees=0))
    model = train_forest(np.zeros((2, 2)), ["a", "b"])
    with pytest.raises(ValueError):
        model.predict(np.zeros((1, 3)))


def test_constant_features_give_majority_leaf():
    model = train_forest(np.zeros((5, 3)), ["a", "a", "b", "a", "b"], EXACT)
    assert model.predict_proba(np.zeros(3)).tolist() == [0.6, 0.4]
    assert model.predict(np.zeros(3)) == "a"


def test_argmax_tie_goes_to_first_class():
    model = train_forest(np.zeros((2, 1)), ["b", "a"], EXACT, classes=["a", "b"])
    assert model.predict(np.zeros(1)) == "a"


def test_roundtrip_and_determinism(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 10))
    y = np.where(X[:, 2] > 0.3, "x", np.where(X[:, 5] < 0, "y", "z")).tolist()
    m1 = train_forest(X, y, seed=11, schema_hash="abc")
    m2 = train_forest(X, y, seed=11, schema_hash="abc")
    assert m1.dumps() == m2.dumps()
    m1.save(tmp_path / "f.json")
    back = ForestModel.load(tmp_path / "f.json")
    Xt = rng.normal(size=(50, 10))
    assert np.array_equal(back.predict_proba(Xt), m1.predict_proba(Xt))
    assert back.schema_hash == "abc" and back.classes == m1.classes
    assert train_forest(X, y, seed=12).dumps() != m1.dumps()


def test_threads_do_not_change_model():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(80, 6))
    y = (X[:, 0] > 0).tolist()
    assert train_forest(X, y, seed=5, threads=3).dumps() == train_forest(X, y, seed=5).dumps()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_consistent_data_fits_exactly(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, size=(40, 3)).astype(float)
    X = np.unique(X, axis=0)
    y = rng.integers(0, 3, size=len(X)).tolist()
    model = train_forest(X, y, ForestConfig(bootstrap=False), seed=seed)
    assert model.predict(X) == [model.classes[model.classes.index(c)] for c in y]
    p = model.predict_proba(X)
    assert np.all(p >= 0) and np.allclose(p.sum(1), 1, atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_rescaling_invariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 3))
    y = (X[:, 0] * X[:, 1] > 0).tolist()
    # without bootstrap every row is in-sample, so no row can fall between a
    # threshold's two neighbours, where the midpoints of the two scales disagree
    cfg = ForestConfig(bootstrap=False)
    Z = np.exp(X) * 3 + 1
    a = train_forest(X, y, cfg, seed=seed)
    b = train_forest(Z, y, cfg, seed=seed)
    assert [t.feature.tolist() for t in a.trees] == [t.feature.tolist() for t in b.trees]
    a, b = a.predict_proba(X), b.predict_proba(Z)
    assert np.array_equal(a, b)
