"""Blind evaluation primitives and non-interactive encrypted decision trees."""
from blindeval.algos import (
    DEFAULT_COST_MODEL,
    CostModel,
    KeyedTuple,
    OpCounts,
    blind_argmin,
    blind_max,
    blind_min,
    blind_sort,
    cost_eval,
    count_ops,
    stage_counts,
)
from blindeval.backend import (
    BackendStats,
    BitWord,
    CipherBit,
    Client,
    ClientKey,
    ContainerError,
    EvaluationKey,
    Evaluator,
    Gate,
    KeyMismatchError,
    KeyPair,
    SecurityConfig,
    TrustBoundaryError,
    keygen,
    load_key,
    save_key,
)
from blindeval.core import (
    ASCENDING,
    DESCENDING,
    blind_add,
    blind_compare,
    blind_order,
    blind_order_keyed,
    blind_popcount,
    blind_select_bit,
    blind_select_word,
    blind_sub,
)
from blindeval.reference import PlainTree, fit_reference
from blindeval.tree import (
    EncryptedDataset,
    TrainConfig,
    TrainedTree,
    decrypt_tree,
    encrypt_tree,
    predict_binary,
    predict_general,
    predict_rows,
    train,
)

__version__ = "0.1.0"
