import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindeval import (
    EncryptedDataset,
    OpCounts,
    PlainTree,
    TrainConfig,
    count_ops,
    decrypt_tree,
    encrypt_tree,
    fit_reference,
    predict_general,
    predict_rows,
    train,
)
from blindeval.data import gen_synthetic
from blindeval.reference import class_loss
from blindeval.tree import feature_score, leaf_label, partition

from conftest import Session


def _encrypt(s, X, y):
    return EncryptedDataset.encrypt(s.client, X, y)


def _random_problem(rng, n, m):
    return rng.integers(0, 2, size=(n, m)), rng.integers(0, 2, size=n)


def test_feature_score_matches_class_loss(clear):
    rng = np.random.default_rng(0)
    for _ in range(40):
        n, m = rng.integers(1, 12), rng.integers(1, 4)
        X, y = _random_problem(rng, n, m)
        valid = rng.integers(0, 2, size=n).astype(bool)
        used = rng.integers(0, 2, size=m)
        ds = _encrypt(clear, X, y)
        cond = clear.client.encrypt_bits(valid.astype(int))
        mask = clear.client.encrypt_bits(used)
        for j in range(m):
            got = clear.read(feature_score(clear.ev, ds, cond, mask, j))
            expect = 2**ds.count_width - 1 if used[j] else class_loss(X[:, j], y, valid)
            assert got == expect
            root = clear.read(feature_score(clear.ev, ds, None, None, j))
            assert root == class_loss(X[:, j], y, np.ones(n, dtype=bool))


def test_partition_and_leaf_label(clear):
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(1, 10))
        valid = rng.integers(0, 2, size=n)
        col = rng.integers(0, 2, size=n)
        y = rng.integers(0, 2, size=n)
        ds = _encrypt(clear, col.reshape(-1, 1), y)
        cond = clear.client.encrypt_bits(valid)
        left, right = partition(clear.ev, cond, clear.client.encrypt_bits(col))
        assert clear.client.decrypt_bits(left) == list(valid & (1 - col))
        assert clear.client.decrypt_bits(right) == list(valid & col)
        ones = int(np.sum(valid & y))
        zeros = int(np.sum(valid)) - ones
        assert clear.read_bit(leaf_label(clear.ev, ds, cond)) == int(ones > zeros)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 16), st.integers(1, 4), st.data())
def test_training_matches_reference(n, m, data):
    d = data.draw(st.integers(1, min(m, 3)))
    seed = data.draw(st.integers(0, 2**32 - 1))
    X, y = _random_problem(np.random.default_rng(seed), n, m)
    s = Session("clear", 8)
    tree = train(s.ev, _encrypt(s, X, y), d)
    plain = decrypt_tree(s.client, tree)
    assert plain == fit_reference(X, y, d)


@pytest.mark.parametrize("n, m, d", [(5, 3, 1), (9, 4, 2), (12, 5, 3), (6, 7, 2)])
def test_live_counts_match_exact_formula(clear, n, m, d):
    X, y = _random_problem(np.random.default_rng(n * m), n, m)
    ds = _encrypt(clear, X, y)
    before = dict(clear.stats.blind_ops)
    train(clear.ev, ds, d)
    live = OpCounts(*(clear.stats.blind_ops[k] - before[k] for k in ("comparisons", "selections", "orderings")))
    assert live == count_ops(n, m, d, exact_sort=True)
    if m == 7:
        assert live == count_ops(n, m, d)


def test_training_never_decrypts(clear):
    X, y = _random_problem(np.random.default_rng(3), 10, 3)
    ds = _encrypt(clear, X, y)
    before = clear.stats.decrypt_calls
    tree = train(clear.ev, ds, 2)
    predict_rows(clear.ev, tree, ds.features)
    assert clear.stats.decrypt_calls == before


@pytest.mark.parametrize("seed", range(5))
def test_planted_feature_is_chosen_at_root(clear, seed):
    j = seed % 4
    plain = gen_synthetic(24, 4, planted_feature=j, signal=1.0, seed=seed)
    tree = train(clear.ev, _encrypt(clear, plain.X, plain.y), 1)
    assert clear.client.decrypt_bits(tree.root.selector) == [int(k == j) for k in range(4)]


def test_binary_prediction_matches_plain_tree(clear):
    rng = np.random.default_rng(4)
    for _ in range(10):
        m, d = 4, int(rng.integers(1, 4))
        plain = PlainTree(d, rng.integers(0, m, size=2**d - 1).tolist(), rng.integers(0, 2, size=2**d).tolist())
        tree = encrypt_tree(clear.client, plain, m)
        X = rng.integers(0, 2, size=(8, m))
        rows = [clear.client.encrypt_bits(r) for r in X]
        got = clear.client.decrypt_bits(predict_rows(clear.ev, tree, rows))
        assert got == plain.predict(X).tolist()
        assert decrypt_tree(clear.client, tree) == plain


def test_general_prediction_with_thresholds(clear):
    rng = np.random.default_rng(5)
    w, m = 3, 3
    for _ in range(10):
        d = int(rng.integers(1, 3))
        plain = PlainTree(
            d,
            rng.integers(0, m, size=2**d - 1).tolist(),
            rng.integers(0, 2, size=2**d).tolist(),
            rng.integers(0, 2**w, size=2**d - 1).tolist(),
        )
        tree = encrypt_tree(clear.client, plain, m, threshold_width=w)
        X = rng.integers(0, 2**w, size=(6, m))
        for row in X:
            x = [clear.word(int(v), w) for v in row]
            assert clear.read_bit(predict_general(clear.ev, tree, x)) == plain.predict_one(row)
        assert decrypt_tree(clear.client, tree) == plain


def test_validation(clear):
    X, y = _random_problem(np.random.default_rng(6), 4, 2)
    ds = _encrypt(clear, X, y)
    with pytest.raises(ValueError):
        train(clear.ev, ds, 3)
    with pytest.raises(ValueError):
        train(clear.ev, ds, 0)
    with pytest.raises(ValueError):
        train(clear.ev, EncryptedDataset(ds.features, []), 1)
    with pytest.raises(ValueError):
        EncryptedDataset(ds.features, ds.labels, count_width=2)
    with pytest.raises(ValueError):
        EncryptedDataset([[ds.features[0][0]], []], [])
    tree = train(clear.ev, ds, 1)
    with pytest.raises(ValueError):
        predict_rows(clear.ev, tree, [ds.features[0][:1]])


def test_wider_count_width_gives_same_tree(clear):
    X, y = _random_problem(np.random.default_rng(7), 9, 3)
    ds = _encrypt(clear, X, y)
    a = decrypt_tree(clear.client, train(clear.ev, ds, 2))
    b = decrypt_tree(clear.client, train(clear.ev, ds, TrainConfig(2, count_width=7)))
    assert a == b == fit_reference(X, y, 2)
