"""Binary containers for encrypted datasets (BEFD) and models (BEFM).

Layout, all integers little-endian::

    magic(4) | version u32 | backend id (u16 length + utf-8) | key id (16)
    | header fields | ciphertext records

Every ciphertext record is ``u32 length + bytes``. Ciphertext sizes are
fixed per backend, so two containers of equal shape have equal length and
identical non-ciphertext bytes.

Key files (BEFK) live in :mod:`blindeval.backend`.
"""
from __future__ import annotations

import io
import struct
from pathlib import Path

from blindeval.backend import (
    KEY_ID_BYTES,
    BitWord,
    ContainerError,
    Evaluator,
    KeyMismatchError,
    _pack_str,
    _unpack_str,
)
from blindeval.tree import BINARY, GENERAL, EncryptedDataset, TrainedTree, TreeNode

DATA_MAGIC = b"BEFD"
MODEL_MAGIC = b"BEFM"
VERSION = 1
_PROTOCOL_CODE = {BINARY: 0, GENERAL: 1}


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise ContainerError("truncated container")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u8(self):
        return self.take(1)[0]

    def string(self):
        s, self.pos = _unpack_str(self.buf, self.pos)
        return s

    def done(self):
        if self.pos != len(self.buf):
            raise ContainerError("trailing bytes after container payload")


def _header(out, magic, ev):
    out.write(magic)
    out.write(struct.pack("<I", VERSION))
    out.write(_pack_str(ev.backend))
    out.write(ev.key.key_id)


def _check_header(r, magic, ev):
    if r.take(4) != magic:
        raise ContainerError(f"bad magic, expected {magic!r}")
    version = r.u32()
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    backend = r.string()
    if backend != ev.backend:
        raise ContainerError(f"container is for backend {backend!r}, key is {ev.backend!r}")
    if r.take(KEY_ID_BYTES) != ev.key.key_id:
        raise KeyMismatchError("container was encrypted under a different key")


def _write_bit(out, ev, bit):
    data = ev.dump_bit(bit)
    out.write(struct.pack("<I", len(data)))
    out.write(data)


def _read_bit(r, ev):
    return ev.load_bit(r.take(r.u32()))


# --------------------------------------------------------------------------
# datasets


def dataset_to_bytes(ev: Evaluator, ds: EncryptedDataset, word_width: int = 1) -> bytes:
    """Serialize an encrypted dataset. ``word_width`` > 1 means each feature
    cell is a word of that many consecutive bits (general protocol inputs)."""
    out = io.BytesIO()
    _header(out, DATA_MAGIC, ev)
    n = ds.n_rows
    cells = len(ds.features[0])
    if cells % word_width:
        raise ValueError("row width is not a multiple of word_width")
    out.write(struct.pack("<IIIIB", n, cells // word_width, word_width, ds.count_width, int(bool(ds.labels))))
    for row in ds.features:
        for b in row:
            _write_bit(out, ev, b)
    for b in ds.labels:
        _write_bit(out, ev, b)
    return out.getvalue()


def _read_table(ev, buf):
    r = _Reader(buf)
    _check_header(r, DATA_MAGIC, ev)
    n, m, word_width, count_width, has_labels = struct.unpack("<IIIIB", r.take(17))
    feats = [[_read_bit(r, ev) for _ in range(m * word_width)] for _ in range(n)]
    labels = [_read_bit(r, ev) for _ in range(n)] if has_labels else []
    r.done()
    return feats, labels, word_width, count_width


def dataset_from_bytes(ev: Evaluator, buf: bytes) -> tuple[EncryptedDataset, int]:
    """Inverse of :func:`dataset_to_bytes`; returns (dataset, word_width)."""
    feats, labels, word_width, count_width = _read_table(ev, buf)
    if not feats or not feats[0]:
        raise ContainerError("container holds no feature columns (is it a result file?)")
    return EncryptedDataset(feats, labels, count_width), word_width


def results_from_bytes(ev: Evaluator, buf: bytes) -> list:
    """Label column of a BEFD container (prediction results or training labels)."""
    return _read_table(ev, buf)[1]


def results_to_bytes(ev: Evaluator, bits) -> bytes:
    """Prediction results: a BEFD with zero feature columns and a label column."""
    out = io.BytesIO()
    _header(out, DATA_MAGIC, ev)
    bits = list(bits)
    out.write(struct.pack("<IIIIB", len(bits), 0, 1, 0, 1))
    for b in bits:
        _write_bit(out, ev, b)
    return out.getvalue()


def rows_as_words(ds: EncryptedDataset, word_width: int) -> list[list[BitWord]]:
    return [
        [BitWord(row[i : i + word_width]) for i in range(0, len(row), word_width)]
        for row in ds.features
    ]


# --------------------------------------------------------------------------
# models


def model_to_bytes(ev: Evaluator, tree: TrainedTree) -> bytes:
    out = io.BytesIO()
    _header(out, MODEL_MAGIC, ev)
    out.write(
        struct.pack(
            "<IIIIB",
            tree.m_features,
            tree.max_depth,
            tree.count_width,
            tree.threshold_width,
            _PROTOCOL_CODE[tree.protocol],
        )
    )
    for node in tree.nodes_breadth_first():
        if node.is_leaf:
            _write_bit(out, ev, node.leaf_label)
            continue
        for b in node.selector:
            _write_bit(out, ev, b)
        if tree.protocol == GENERAL:
            for b in node.threshold:
                _write_bit(out, ev, b)
    return out.getvalue()


def model_from_bytes(ev: Evaluator, buf: bytes) -> TrainedTree:
    r = _Reader(buf)
    _check_header(r, MODEL_MAGIC, ev)
    m, depth, count_width, threshold_width, proto = struct.unpack("<IIIIB", r.take(17))
    protocol = {v: k for k, v in _PROTOCOL_CODE.items()}.get(proto)
    if protocol is None:
        raise ContainerError(f"unknown protocol code {proto}")

    def build(level):
        if level == depth:
            return TreeNode(leaf_label=_read_bit(r, ev))
        return TreeNode(selector=[_read_bit(r, ev) for _ in range(m)])

    # nodes are stored breadth-first, so rebuild level by level
    root = build(0)
    level_nodes = [root]
    if protocol == GENERAL:
        root.threshold = BitWord(_read_bit(r, ev) for _ in range(threshold_width))
    for level in range(1, depth + 1):
        nxt = []
        for parent in level_nodes:
            for side in ("left", "right"):
                child = build(level)
                if protocol == GENERAL and level < depth:
                    child.threshold = BitWord(_read_bit(r, ev) for _ in range(threshold_width))
                setattr(parent, side, child)
                nxt.append(child)
        level_nodes = nxt
    r.done()
    return TrainedTree(root, m, depth, protocol, threshold_width, count_width)


def save_dataset(path, ev, ds, word_width=1):
    Path(path).write_bytes(dataset_to_bytes(ev, ds, word_width))


def load_dataset(path, ev):
    return dataset_from_bytes(ev, Path(path).read_bytes())


def save_model(path, ev, tree):
    Path(path).write_bytes(model_to_bytes(ev, tree))


def load_model(path, ev):
    return model_from_bytes(ev, Path(path).read_bytes())
