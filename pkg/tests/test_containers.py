import numpy as np
import pytest

from blindeval import EncryptedDataset, PlainTree, SecurityConfig, encrypt_tree, keygen, train, Evaluator
from blindeval.backend import ContainerError, KeyMismatchError
from blindeval.containers import (
    dataset_from_bytes,
    dataset_to_bytes,
    model_from_bytes,
    model_to_bytes,
    results_from_bytes,
    results_to_bytes,
    rows_as_words,
)
from blindeval.tree import decrypt_tree


def _dataset(s, n=5, m=3, seed=0, labels=True):
    rng = np.random.default_rng(seed)
    X, y = rng.integers(0, 2, size=(n, m)), rng.integers(0, 2, size=n)
    return X, y, EncryptedDataset.encrypt(s.client, X, y if labels else None)


def test_dataset_round_trip(clear):
    X, y, ds = _dataset(clear)
    blob = dataset_to_bytes(clear.ev, ds)
    back, width = dataset_from_bytes(clear.ev, blob)
    assert width == 1 and blob[:4] == b"BEFD"
    assert [clear.client.decrypt_bits(r) for r in back.features] == X.tolist()
    assert clear.client.decrypt_bits(back.labels) == y.tolist()
    assert back.count_width == ds.count_width
    assert dataset_to_bytes(clear.ev, back) == blob


def test_unlabelled_dataset_and_word_rows(clear):
    words = [[clear.word(5, 3), clear.word(2, 3)], [clear.word(0, 3), clear.word(7, 3)]]
    ds = EncryptedDataset([list(w[0]) + list(w[1]) for w in words], [])
    blob = dataset_to_bytes(clear.ev, ds, word_width=3)
    back, width = dataset_from_bytes(clear.ev, blob)
    assert width == 3 and back.labels == []
    assert [[clear.read(w) for w in row] for row in rows_as_words(back, 3)] == [[5, 2], [0, 7]]
    assert dataset_to_bytes(clear.ev, back, 3) == blob
    with pytest.raises(ValueError):
        dataset_to_bytes(clear.ev, ds, word_width=4)


def test_results_round_trip(clear):
    bits = clear.client.encrypt_bits([1, 0, 0, 1])
    blob = results_to_bytes(clear.ev, bits)
    back = results_from_bytes(clear.ev, blob)
    assert clear.client.decrypt_bits(back) == [1, 0, 0, 1]
    assert results_to_bytes(clear.ev, back) == blob
    with pytest.raises(ContainerError):
        dataset_from_bytes(clear.ev, blob)


@pytest.mark.parametrize("depth", (1, 2, 3))
def test_model_round_trip_binary(clear, depth):
    X, y, ds = _dataset(clear, n=8, m=3, seed=depth)
    tree = train(clear.ev, ds, depth)
    blob = model_to_bytes(clear.ev, tree)
    back = model_from_bytes(clear.ev, blob)
    assert model_to_bytes(clear.ev, back) == blob
    assert decrypt_tree(clear.client, back) == decrypt_tree(clear.client, tree)


def test_model_round_trip_general(clear):
    plain = PlainTree(2, [1, 0, 2], [0, 1, 1, 0], [3, 5, 0])
    tree = encrypt_tree(clear.client, plain, 3, threshold_width=3)
    blob = model_to_bytes(clear.ev, tree)
    back = model_from_bytes(clear.ev, blob)
    assert model_to_bytes(clear.ev, back) == blob
    assert decrypt_tree(clear.client, back) == plain


def test_equal_shapes_give_equal_layout(clear):
    blobs = []
    for seed in range(3):
        _, _, ds = _dataset(clear, n=6, m=3, seed=seed)
        blobs.append(model_to_bytes(clear.ev, train(clear.ev, ds, 2)))
    assert len({len(b) for b in blobs}) == 1


def test_container_errors(clear):
    _, _, ds = _dataset(clear)
    blob = dataset_to_bytes(clear.ev, ds)
    other = Evaluator(keygen(SecurityConfig(rng_seed=4242, insecure_test_mode=True)).evaluation_key)
    with pytest.raises(KeyMismatchError):
        dataset_from_bytes(other, blob)
    with pytest.raises(ContainerError, match="magic"):
        dataset_from_bytes(clear.ev, b"XXXX" + blob[4:])
    with pytest.raises(ContainerError, match="truncated"):
        dataset_from_bytes(clear.ev, blob[:-1])
    with pytest.raises(ContainerError, match="trailing"):
        dataset_from_bytes(clear.ev, blob + b"\0")
    with pytest.raises(ContainerError, match="magic"):
        model_from_bytes(clear.ev, blob)


def test_backend_mismatch_is_reported(clear, encrypted):
    _, _, ds = _dataset(clear, n=2, m=1)
    with pytest.raises(ContainerError, match="backend"):
        dataset_from_bytes(encrypted.ev, dataset_to_bytes(clear.ev, ds))


def test_encrypted_containers_round_trip(encrypted):
    X, y, ds = _dataset(encrypted, n=2, m=2, seed=1)
    blob = dataset_to_bytes(encrypted.ev, ds)
    back, _ = dataset_from_bytes(encrypted.ev, blob)
    assert dataset_to_bytes(encrypted.ev, back) == blob
    assert [encrypted.client.decrypt_bits(r) for r in back.features] == X.tolist()
    plain = PlainTree(1, [1], [1, 0])
    mblob = model_to_bytes(encrypted.ev, encrypt_tree(encrypted.client, plain, 2))
    mback = model_from_bytes(encrypted.ev, mblob)
    assert model_to_bytes(encrypted.ev, mback) == mblob
    assert decrypt_tree(encrypted.client, mback) == plain
