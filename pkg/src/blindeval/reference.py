"""Plaintext decision trees and an integer-domain reference trainer.

The reference trainer applies the same rules as the blind trainer (class-loss
score, lowest-index tie break, strict-majority leaves with ties to 0) directly
on numpy integers. It shares no code with the gate-level path, so it is used as
the independent oracle for encrypted training.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class PlainTree:
    """Complete binary tree stored breadth-first.

    ``features[k]`` is the split feature of internal node ``k`` (children of k
    are 2k+1 and 2k+2), ``leaves`` holds the 2**depth leaf labels left to
    right. ``thresholds`` is set only for the general (word-valued) protocol;
    the branch goes right when ``x[feature] > threshold``.
    """

    depth: int
    features: list[int]
    leaves: list[int]
    thresholds: list[int] | None = None

    def __post_init__(self):
        if len(self.features) != 2**self.depth - 1 or len(self.leaves) != 2**self.depth:
            raise ValueError("node lists do not describe a complete tree of this depth")

    def predict_one(self, x) -> int:
        k = 0
        for _ in range(self.depth):
            f = self.features[k]
            if self.thresholds is None:
                right = bool(x[f])
            else:
                right = x[f] > self.thresholds[k]
            k = 2 * k + (2 if right else 1)
        return self.leaves[k - (2**self.depth - 1)]

    def predict(self, X) -> np.ndarray:
        return np.array([self.predict_one(row) for row in np.asarray(X)], dtype=np.int64)

    def to_dict(self) -> dict:
        d = {"depth": self.depth, "features": list(map(int, self.features)), "leaves": list(map(int, self.leaves))}
        if self.thresholds is not None:
            d["thresholds"] = list(map(int, self.thresholds))
        return d

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_dict(cls, d: dict) -> "PlainTree":
        return cls(d["depth"], list(d["features"]), list(d["leaves"]), d.get("thresholds"))


def class_loss(col, y, valid) -> int:
    agree = int(np.sum(valid & (col == y)))
    disagree = int(np.sum(valid)) - agree
    return min(agree, disagree)


def fit_reference(X, y, max_depth: int) -> PlainTree:
    X = np.asarray(X, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    n, m = X.shape
    if not 1 <= max_depth <= m:
        raise ValueError(f"max_depth must be in 1..{m}")
    saturated = 2 ** max(n.bit_length(), 1) - 1

    features = [0] * (2**max_depth - 1)
    leaves = [0] * (2**max_depth)

    def grow(k, valid, used, level):
        if level == max_depth:
            ones = int(np.sum(valid & (y == 1)))
            zeros = int(np.sum(valid & (y == 0)))
            leaves[k - len(features)] = int(ones > zeros)
            return
        scores = [saturated if j in used else class_loss(X[:, j], y, valid) for j in range(m)]
        j = int(np.argmin(scores))  # first minimum -> lowest index on ties
        features[k] = j
        col = X[:, j] == 1
        grow(2 * k + 1, valid & ~col, used | {j}, level + 1)
        grow(2 * k + 2, valid & col, used | {j}, level + 1)

    grow(0, np.ones(n, dtype=bool), frozenset(), 0)
    return PlainTree(max_depth, features, leaves)


def accuracy(tree: PlainTree, X, y) -> float:
    return float(np.mean(tree.predict(X) == np.asarray(y)))
