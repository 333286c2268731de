"""List-level blind operations and the analytical cost/op-count model."""
from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from blindeval.backend import BitWord, Evaluator
from blindeval.core import ASCENDING, DESCENDING, blind_order, blind_order_keyed


@dataclass(frozen=True)
class KeyedTuple:
    key: BitWord
    payload: BitWord


def _check_uniform(words, what="list"):
    widths = {len(w) for w in words}
    if len(widths) > 1:
        raise ValueError(f"{what} has mixed widths {sorted(widths)}")


def _extreme(ev, words, take_low):
    if not words:
        raise ValueError("cannot take the min/max of an empty list")
    _check_uniform(words)
    best = words[0]
    for w in words[1:]:
        pair = blind_order(ev, best, w, ASCENDING)
        best = pair.low if take_low else pair.high
    return best


def blind_min(ev: Evaluator, words: Sequence[BitWord]) -> BitWord:
    return _extreme(ev, list(words), True)


def blind_max(ev: Evaluator, words: Sequence[BitWord]) -> BitWord:
    return _extreme(ev, list(words), False)


def blind_argmin(ev: Evaluator, items: Sequence[KeyedTuple]) -> KeyedTuple:
    """Smallest key with its payload; ties keep the earliest item."""
    items = list(items)
    if not items:
        raise ValueError("cannot take the argmin of an empty list")
    _check_uniform([t.key for t in items], "keys")
    _check_uniform([t.payload for t in items], "payloads")
    best = items[0]
    for t in items[1:]:
        (k, p), _ = blind_order_keyed(ev, best.key, best.payload, t.key, t.payload, ASCENDING)
        best = KeyedTuple(k, p)
    return best


def blind_sort(ev: Evaluator, items: Sequence[KeyedTuple], direction: str = ASCENDING) -> list[KeyedTuple]:
    """Stable insertion-network sort by key: exactly n(n-1)/2 keyed orderings.

    Each new element is swapped all the way down blindly, because whether a
    swap happened is never known.
    """
    arr = list(items)
    _check_uniform([t.key for t in arr], "keys")
    _check_uniform([t.payload for t in arr], "payloads")
    for i in range(len(arr)):
        for j in range(i, 0, -1):
            lo, hi = arr[j - 1], arr[j]
            (k0, p0), (k1, p1) = blind_order_keyed(ev, lo.key, lo.payload, hi.key, hi.payload, direction)
            arr[j - 1], arr[j] = KeyedTuple(k0, p0), KeyedTuple(k1, p1)
    return arr


# --------------------------------------------------------------------------
# cost model


@dataclass(frozen=True)
class CostModel:
    """Seconds per blind op as affine functions of the input bit count.

    Coefficients are decimal strings so evaluation is exact rational
    arithmetic. The defaults are per-op timings measured on TFHE-rs.
    """

    comparison: tuple[str, str] = ("52.2", "-30.29")
    selection: tuple[str, str] = ("156.6", "-82.34")
    ordering: tuple[str, str] = ("12.79", "492.3")

    @staticmethod
    def _affine(coeffs, x) -> Fraction:
        slope, intercept = (Fraction(str(c)) for c in coeffs)
        return slope * Fraction(x) + intercept

    def f(self, x) -> float:
        return float(self._affine(self.comparison, x))

    def g(self, x) -> float:
        return float(self._affine(self.selection, x))

    def h(self, x) -> float:
        return float(self._affine(self.ordering, x))

    def total(self, x, a, b, c) -> Fraction:
        return (
            a * self._affine(self.comparison, x)
            + b * self._affine(self.selection, x)
            + c * self._affine(self.ordering, x)
        )

    @classmethod
    def from_dict(cls, d: dict) -> "CostModel":
        def pair(name):
            v = d[name]
            if isinstance(v, dict):
                v = (v["slope"], v["intercept"])
            slope, intercept = v
            return (str(slope), str(intercept))

        return cls(pair("comparison"), pair("selection"), pair("ordering"))

    @classmethod
    def load(cls, path: str | Path) -> "CostModel":
        """Read a JSON or TOML file with comparison/selection/ordering pairs."""
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return cls.from_dict(tomllib.loads(path.read_text()))
        return cls.from_dict(json.loads(path.read_text()))

    def to_dict(self) -> dict:
        return {
            name: {"slope": s, "intercept": i}
            for name, (s, i) in (
                ("comparison", self.comparison),
                ("selection", self.selection),
                ("ordering", self.ordering),
            )
        }


DEFAULT_COST_MODEL = CostModel()


def cost_eval(x: int, a: int, b: int, c: int, model: CostModel = DEFAULT_COST_MODEL) -> float:
    """Projected seconds for ``a`` comparisons, ``b`` selections and ``c``
    orderings on ``x``-bit inputs."""
    if x < 1:
        raise ValueError("input bit count must be at least 1")
    if min(a, b, c) < 0:
        raise ValueError("operation counts must be non-negative")
    return float(model.total(x, a, b, c))


# --------------------------------------------------------------------------
# op counts


@dataclass(frozen=True)
class OpCounts:
    comparisons: int = 0
    selections: int = 0
    orderings: int = 0

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(
            self.comparisons + other.comparisons,
            self.selections + other.selections,
            self.orderings + other.orderings,
        )

    def __mul__(self, k: int) -> "OpCounts":
        return OpCounts(self.comparisons * k, self.selections * k, self.orderings * k)

    __rmul__ = __mul__

    def as_dict(self) -> dict:
        return {"comparisons": self.comparisons, "selections": self.selections, "orderings": self.orderings}

    @classmethod
    def from_stats(cls, blind_ops: dict) -> "OpCounts":
        return cls(blind_ops["comparisons"], blind_ops["selections"], blind_ops["orderings"])


def stage_counts(n: int, m: int, *, exact_sort: bool = False) -> dict[str, OpCounts]:
    """Blind ops per tree-building stage.

    ``feature_selection`` (root) is (m, n*m, 3m) and ``child`` is
    (m, 2nm, 3m). The 3m ordering budget equals the insertion sort's
    m(m-1)/2 only at m = 7; ``exact_sort`` swaps in the latter. ``leaf`` is one majority comparison plus n validity selections.
    """
    if min(n, m) < 1:
        raise ValueError("n and m must be at least 1")
    orderings = m * (m - 1) // 2 if exact_sort else 3 * m
    return {
        "feature_selection": OpCounts(m, n * m, orderings),
        "child": OpCounts(m, n * 2 * m, orderings),
        "leaf": OpCounts(1, n, 0),
    }


def count_ops(n: int, m: int, d: int, *, exact_sort: bool = False) -> OpCounts:
    """Total blind ops to train a complete tree of depth ``d``.

    The root runs feature selection, each of the 2**l nodes at levels
    1..d-1 runs the child stage, and the 2**d leaves run the leaf stage.
    """
    if d < 1:
        raise ValueError("depth must be at least 1")
    s = stage_counts(n, m, exact_sort=exact_sort)
    internal_children = 2**d - 2
    return s["feature_selection"] + s["child"] * internal_children + s["leaf"] * 2**d


def count_ops_series(n: int, m: int, depths: Sequence[int]) -> list[tuple[int, OpCounts]]:
    return [(d, count_ops(n, m, d)) for d in depths]
