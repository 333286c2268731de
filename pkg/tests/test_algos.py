import itertools
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindeval import (
    ASCENDING,
    DESCENDING,
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

from conftest import Session


def _lists(width, max_len=4):
    for n in range(1, max_len + 1):
        yield from itertools.product(range(2**width), repeat=n)


@pytest.mark.parametrize("width", (1, 2))
def test_min_max_exhaustive(clear, width):
    for values in _lists(width):
        words = [clear.word(v, width) for v in values]
        assert clear.read(blind_min(clear.ev, words)) == min(values)
        assert clear.read(blind_max(clear.ev, words)) == max(values)


@pytest.mark.parametrize("width", (1, 2))
@pytest.mark.parametrize("direction", (ASCENDING, DESCENDING))
def test_sort_exhaustive_and_stable(clear, width, direction):
    for keys in _lists(width):
        items = [KeyedTuple(clear.word(k, width), clear.word(i, 2)) for i, k in enumerate(keys)]
        out = blind_sort(clear.ev, items, direction)
        got = [(clear.read(t.key), clear.read(t.payload)) for t in out]
        # python's sort is stable, so it is the oracle for tie handling too
        expect = sorted(((k, i) for i, k in enumerate(keys)), key=lambda p: -p[0] if direction == DESCENDING else p[0])
        assert got == expect, keys


def test_argmin_keeps_first_of_ties(clear):
    for keys in _lists(2):
        items = [KeyedTuple(clear.word(k, 2), clear.word(i, 2)) for i, k in enumerate(keys)]
        best = blind_argmin(clear.ev, items)
        assert clear.read(best.key) == min(keys)
        assert clear.read(best.payload) == keys.index(min(keys))


def test_sort_uses_n_choose_2_orderings(clear):
    for n in range(0, 7):
        items = [KeyedTuple(clear.word(0, 2), clear.word(0, 1)) for _ in range(n)]
        before = clear.stats.blind_ops["orderings"]
        blind_sort(clear.ev, items)
        assert clear.stats.blind_ops["orderings"] - before == n * (n - 1) // 2


def test_empty_and_mixed_inputs(clear):
    assert blind_sort(clear.ev, []) == []
    with pytest.raises(ValueError):
        blind_min(clear.ev, [])
    with pytest.raises(ValueError):
        blind_min(clear.ev, [clear.word(1, 2), clear.word(1, 3)])
    with pytest.raises(ValueError):
        blind_argmin(clear.ev, [])


@settings(max_examples=120, deadline=None)
@given(st.integers(1, 8), st.data())
def test_sort_property(width, data):
    s = Session("clear", 5)
    keys = data.draw(st.lists(st.integers(0, 2**width - 1), min_size=1, max_size=8))
    items = [KeyedTuple(s.word(k, width), s.word(i, 3)) for i, k in enumerate(keys)]
    out = [(s.read(t.key), s.read(t.payload)) for t in blind_sort(s.ev, items)]
    assert out == sorted((k, i) for i, k in enumerate(keys))


@settings(max_examples=120, deadline=None)
@given(st.integers(1, 10), st.data())
def test_min_max_property(width, data):
    s = Session("clear", 5)
    values = data.draw(st.lists(st.integers(0, 2**width - 1), min_size=1, max_size=10))
    words = [s.word(v, width) for v in values]
    assert s.read(blind_min(s.ev, words)) == min(values)
    assert s.read(blind_max(s.ev, words)) == max(values)


# --------------------------------------------------------------------------
# cost model


def test_default_coefficients():
    assert cost_eval(4, 1, 0, 0) == 178.51
    assert DEFAULT_COST_MODEL.g(4) == pytest.approx(544.06, abs=1e-12)
    assert DEFAULT_COST_MODEL.h(4) == pytest.approx(543.46, abs=1e-12)
    assert cost_eval(1, 1, 1, 1) == 601.26


@settings(max_examples=200)
@given(
    st.integers(1, 64),
    *(st.integers(0, 10_000) for _ in range(6)),
)
def test_cost_superposition(x, a1, b1, c1, a2, b2, c2):
    whole = cost_eval(x, a1 + a2, b1 + b2, c1 + c2)
    parts = cost_eval(x, a1, b1, c1) + cost_eval(x, a2, b2, c2)
    assert math.isclose(whole, parts, rel_tol=1e-12, abs_tol=1e-9)
    exact = DEFAULT_COST_MODEL.total(x, a1 + a2, b1 + b2, c1 + c2)
    assert exact == DEFAULT_COST_MODEL.total(x, a1, b1, c1) + DEFAULT_COST_MODEL.total(x, a2, b2, c2)


def test_cost_validation():
    with pytest.raises(ValueError):
        cost_eval(0, 1, 1, 1)
    with pytest.raises(ValueError):
        cost_eval(4, -1, 0, 0)


def test_cost_model_files(tmp_path):
    custom = {"comparison": [1, 2], "selection": {"slope": "0.5", "intercept": "0"}, "ordering": [0, 7]}
    p = tmp_path / "model.json"
    p.write_text(json.dumps(custom))
    model = CostModel.load(p)
    assert cost_eval(4, 1, 2, 3, model) == 6 + 4 + 21
    t = tmp_path / "model.toml"
    t.write_text('comparison = ["1", "2"]\nselection = ["0.5", "0"]\nordering = ["0", "7"]\n')
    assert CostModel.load(t) == model
    assert CostModel.from_dict(model.to_dict()) == model


# --------------------------------------------------------------------------
# op counts (values worked out by hand from the stage rules)


def test_stage_counts_at_seven_features():
    s = stage_counts(10, 7)
    assert s["feature_selection"] == OpCounts(7, 70, 21)
    assert s["child"] == OpCounts(7, 140, 21)
    assert s["leaf"] == OpCounts(1, 10, 0)
    assert stage_counts(10, 7, exact_sort=True) == s


@pytest.mark.parametrize(
    "n, m, d, expect",
    [
        (10, 7, 1, (9, 90, 21)),
        (10, 7, 2, (25, 390, 63)),
        (10, 7, 3, (57, 990, 147)),
        (20, 4, 2, (16, 480, 36)),
    ],
)
def test_count_ops_frozen(n, m, d, expect):
    assert count_ops(n, m, d) == OpCounts(*expect)


def test_count_ops_exact_sort_differs_off_seven():
    assert count_ops(20, 4, 2, exact_sort=True) == OpCounts(16, 480, 18)


def test_count_ops_validation():
    with pytest.raises(ValueError):
        count_ops(10, 4, 0)
    with pytest.raises(ValueError):
        stage_counts(0, 4)


def test_opcounts_arithmetic():
    a = OpCounts(1, 2, 3)
    assert a + a == 2 * a == a * 2 == OpCounts(2, 4, 6)
    assert OpCounts.from_stats(a.as_dict()) == a
