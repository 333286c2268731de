"""Non-interactive decision-tree training and prediction over encrypted bits.

The dataset is never split. Each node carries an encrypted condition vector
(which rows belong to it) and an encrypted feature mask (which features its
ancestors used), so every node at a level does identical work on the full
dataset and the server learns nothing about subset sizes.

Root nodes are special-cased: their condition vector is "all rows" and their
mask is "nothing used", both known by construction, so they are passed as
``None`` and cost no gates.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

from blindeval.algos import KeyedTuple, blind_sort
from blindeval.backend import BitWord, CipherBit, Client, Evaluator
from blindeval.core import (
    ASCENDING,
    blind_compare,
    blind_popcount,
    blind_select_bit,
    blind_sub,
)
from blindeval.reference import PlainTree

BINARY = "binary"
GENERAL = "general"

ConditionVector = Sequence[CipherBit]
FeatureMask = Sequence[CipherBit]


@dataclass
class EncryptedDataset:
    features: list[list[CipherBit]]  # n rows x m features
    labels: list[CipherBit]
    count_width: int = 0

    def __post_init__(self):
        if not self.features:
            raise ValueError("dataset has no rows")
        m = len(self.features[0])
        if m == 0 or any(len(r) != m for r in self.features):
            raise ValueError("feature matrix must be rectangular with at least one column")
        if self.labels and len(self.labels) != len(self.features):
            raise ValueError("label column length differs from row count")
        need = len(self.features).bit_length()
        if self.count_width == 0:
            self.count_width = need
        elif self.count_width < need:
            raise ValueError(f"count_width {self.count_width} cannot hold {len(self.features)} rows")

    @property
    def n_rows(self) -> int:
        return len(self.features)

    @property
    def m_features(self) -> int:
        return len(self.features[0])

    def column(self, j: int) -> list[CipherBit]:
        if not 0 <= j < self.m_features:
            raise IndexError(f"feature index {j} out of range 0..{self.m_features - 1}")
        return [row[j] for row in self.features]

    @classmethod
    def encrypt(cls, client: Client, X, y=None, count_width: int = 0) -> "EncryptedDataset":
        feats = [[client.encrypt_bit(int(v)) for v in row] for row in X]
        labels = [client.encrypt_bit(int(v)) for v in y] if y is not None else []
        return cls(feats, labels, count_width)


@dataclass
class TreeNode:
    selector: list[CipherBit] | None = None
    threshold: BitWord | None = None
    leaf_label: CipherBit | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class TrainConfig:
    max_depth: int
    count_width: int | None = None


@dataclass
class TrainedTree:
    root: TreeNode
    m_features: int
    max_depth: int
    protocol: str = BINARY
    threshold_width: int = 0
    count_width: int = 0

    def nodes_breadth_first(self) -> list[TreeNode]:
        out, level = [], [self.root]
        while level:
            out.extend(level)
            level = [c for node in level if not node.is_leaf for c in (node.left, node.right)]
        return out


# --------------------------------------------------------------------------
# training


def _valid_count(ev, ds, cond):
    if cond is None:
        return ev.constant_word(ds.n_rows, ds.count_width)
    return blind_popcount(ev, cond, ds.count_width)


def feature_score(
    ev: Evaluator,
    ds: EncryptedDataset,
    cond: ConditionVector | None,
    mask: FeatureMask | None,
    j: int,
    *,
    n_valid: BitWord | None = None,
) -> BitWord:
    """Encrypted class loss of feature ``j``: min(agree, disagree) over valid rows.

    Two passes. The first counts valid rows whose feature bit agrees with the
    label and compares that count with its complement to learn (blindly) the
    majority polarity. The second blindly selects, per row, whether the row is
    on the minority side and counts those: that count is the min. Features
    already used on this path saturate to the all-ones word.
    """
    col = ds.column(j)
    w = ds.count_width
    if n_valid is None:
        n_valid = _valid_count(ev, ds, cond)
    agree = [ev.not_(ev.xor(x, y)) for x, y in zip(col, ds.labels)]
    if cond is None:
        in_node = agree
    else:
        zero = ev.constant(0)
        in_node = [blind_select_bit(ev, v, a, zero) for v, a in zip(cond, agree)]
    agree_count = blind_popcount(ev, in_node, w)
    disagree_count = blind_sub(ev, n_valid, agree_count)
    agree_is_majority = blind_compare(ev, agree_count, disagree_count).gt
    if cond is None:
        minority = [blind_select_bit(ev, agree_is_majority, ev.not_(a), a) for a in in_node]
    else:
        minority = [
            blind_select_bit(ev, agree_is_majority, ev.xor(v, g), g) for v, g in zip(cond, in_node)
        ]
    score = blind_popcount(ev, minority, w)
    if mask is not None:
        score = BitWord(ev.or_(b, mask[j]) for b in score)
    return score


def feature_selection(
    ev: Evaluator,
    ds: EncryptedDataset,
    cond: ConditionVector | None,
    mask: FeatureMask | None,
) -> tuple[list[CipherBit], list[CipherBit], list[CipherBit]]:
    """Blindly pick the lowest-loss unused feature.

    Returns (one-hot selector, the selected column, updated mask).
    """
    m = ds.m_features
    if mask is not None and len(mask) != m:
        raise ValueError("feature mask length differs from feature count")
    n_valid = _valid_count(ev, ds, cond)
    tuples = []
    for j in range(m):
        score = feature_score(ev, ds, cond, mask, j, n_valid=n_valid)
        one_hot = [ev.constant(int(k == j)) for k in range(m)]
        tuples.append(KeyedTuple(score, BitWord(one_hot + ds.column(j))))
    best = blind_sort(ev, tuples, ASCENDING)[0].payload
    selector, column = list(best[:m]), list(best[m:])
    new_mask = selector if mask is None else [ev.or_(u, s) for u, s in zip(mask, selector)]
    return selector, column, new_mask


def partition(
    ev: Evaluator, cond: ConditionVector | None, column: Sequence[CipherBit]
) -> tuple[list[CipherBit], list[CipherBit]]:
    """Soft-partition: rows with a 0 in ``column`` go left, 1 go right."""
    if cond is None:
        return [ev.not_(c) for c in column], list(column)
    if len(cond) != len(column):
        raise ValueError("condition vector and column lengths differ")
    left = [ev.and_(v, ev.not_(c)) for v, c in zip(cond, column)]
    right = [ev.and_(v, c) for v, c in zip(cond, column)]
    return left, right


def leaf_label(ev: Evaluator, ds: EncryptedDataset, cond: ConditionVector | None) -> CipherBit:
    """Majority label of the valid rows; ties and empty nodes give 0."""
    w = ds.count_width
    n_valid = _valid_count(ev, ds, cond)
    if cond is None:
        positives = list(ds.labels)
    else:
        zero = ev.constant(0)
        positives = [blind_select_bit(ev, v, y, zero) for v, y in zip(cond, ds.labels)]
    ones = blind_popcount(ev, positives, w)
    zeros = blind_sub(ev, n_valid, ones)
    return blind_compare(ev, ones, zeros).gt


def train(ev: Evaluator, ds: EncryptedDataset, config: TrainConfig | int) -> TrainedTree:
    """Grow a complete tree of ``max_depth`` levels without any decryption."""
    if isinstance(config, int):
        config = TrainConfig(config)
    d = config.max_depth
    if d < 1:
        raise ValueError("max_depth must be at least 1")
    if d > ds.m_features:
        raise ValueError(f"max_depth {d} exceeds the number of features {ds.m_features}")
    if not ds.labels:
        raise ValueError("training needs a label column")
    if config.count_width is not None and config.count_width != ds.count_width:
        ds = EncryptedDataset(ds.features, ds.labels, config.count_width)

    def grow(cond, mask, level):
        if level == d:
            return TreeNode(leaf_label=leaf_label(ev, ds, cond))
        selector, column, new_mask = feature_selection(ev, ds, cond, mask)
        left_cond, right_cond = partition(ev, cond, column)
        return TreeNode(
            selector=selector,
            left=grow(left_cond, new_mask, level + 1),
            right=grow(right_cond, new_mask, level + 1),
        )

    return TrainedTree(grow(None, None, 0), ds.m_features, d, BINARY, 0, ds.count_width)


# --------------------------------------------------------------------------
# prediction


def _feature_at_node(ev, selector, x):
    """OR_j(selector_j AND x_j): the input's value of the node's hidden feature."""
    acc = None
    for s, v in zip(selector, x):
        t = ev.and_(s, v)
        acc = t if acc is None else ev.or_(acc, t)
    return acc


def predict_binary(ev: Evaluator, tree: TrainedTree, x: Sequence[CipherBit]) -> CipherBit:
    if len(x) != tree.m_features:
        raise ValueError(f"input has {len(x)} features, tree expects {tree.m_features}")

    def walk(node):
        if node.is_leaf:
            return node.leaf_label
        go_right = _feature_at_node(ev, node.selector, x)
        return blind_select_bit(ev, go_right, walk(node.right), walk(node.left))

    return walk(tree.root)


def predict_general(ev: Evaluator, tree: TrainedTree, x: Sequence[BitWord]) -> CipherBit:
    """Prediction with per-node thresholds: right iff x[feature] > threshold."""
    if len(x) != tree.m_features:
        raise ValueError(f"input has {len(x)} features, tree expects {tree.m_features}")
    if tree.protocol != GENERAL:
        raise ValueError("tree has no thresholds; use predict_binary")
    if any(len(w) != tree.threshold_width for w in x):
        raise ValueError(f"input words must be {tree.threshold_width} bits wide")

    def walk(node):
        if node.is_leaf:
            return node.leaf_label
        value = BitWord(
            _feature_at_node(ev, node.selector, [w[i] for w in x]) for i in range(tree.threshold_width)
        )
        go_right = blind_compare(ev, value, node.threshold).gt
        return blind_select_bit(ev, go_right, walk(node.right), walk(node.left))

    return walk(tree.root)


def predict_rows(ev: Evaluator, tree: TrainedTree, rows) -> list[CipherBit]:
    fn = predict_general if tree.protocol == GENERAL else predict_binary
    return [fn(ev, tree, row) for row in rows]


# --------------------------------------------------------------------------
# client-side conversion


def encrypt_tree(client: Client, plain: PlainTree, m_features: int, threshold_width: int = 0) -> TrainedTree:
    """Encrypt a plaintext tree (e.g. trained elsewhere) for blind prediction."""
    general = plain.thresholds is not None
    if general and threshold_width < 1:
        raise ValueError("threshold_width is required for trees with thresholds")
    n_internal = len(plain.features)

    def build(k):
        if k >= n_internal:
            return TreeNode(leaf_label=client.encrypt_bit(plain.leaves[k - n_internal]))
        f = plain.features[k]
        if not 0 <= f < m_features:
            raise ValueError(f"feature {f} out of range")
        return TreeNode(
            selector=client.encrypt_bits(int(i == f) for i in range(m_features)),
            threshold=client.encrypt_word(plain.thresholds[k], threshold_width) if general else None,
            left=build(2 * k + 1),
            right=build(2 * k + 2),
        )

    return TrainedTree(
        build(0),
        m_features,
        plain.depth,
        GENERAL if general else BINARY,
        threshold_width if general else 0,
    )


def decrypt_tree(client: Client, tree: TrainedTree) -> PlainTree:
    features, leaves, thresholds = [], [], []
    for node in tree.nodes_breadth_first():
        if node.is_leaf:
            leaves.append(client.decrypt_bit(node.leaf_label))
            continue
        bits = client.decrypt_bits(node.selector)
        if sum(bits) != 1:
            raise ValueError(f"node selector is not one-hot: {bits}")
        features.append(bits.index(1))
        if node.threshold is not None:
            thresholds.append(client.decrypt_word(node.threshold))
    return PlainTree(tree.max_depth, features, leaves, thresholds if tree.protocol == GENERAL else None)
