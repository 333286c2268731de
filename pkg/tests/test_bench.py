import json

import pytest

from blindeval.bench import (
    BenchReport,
    bench_primitives,
    fit_affine,
    fit_extrapolation,
    fit_quadratic_scale,
    primitive_gate_count,
    sort_gate_count,
)


def test_two_points_fit_exactly():
    fit = fit_extrapolation([(1, 10), (2, 20)])
    assert fit["slope"] == pytest.approx(10)
    assert fit["intercept"] == pytest.approx(0, abs=1e-12)


def test_collinear_points_have_zero_residual():
    fit = fit_extrapolation([(1, 3), (2, 5), (4, 9)], project_depths=[10])
    assert max(abs(r) for r in fit["residuals"]) < 1e-9
    assert fit["r_squared"] == pytest.approx(1.0)
    assert fit["projection"] == [[10, pytest.approx(21)]]


def test_least_squares_against_closed_form():
    xs, ys = [1, 2, 3, 4], [2.0, 2.9, 4.2, 4.9]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)
    fit = fit_affine(xs, ys)
    assert fit.slope == pytest.approx(slope)
    assert fit.intercept == pytest.approx(my - slope * mx)
    assert sum(fit.residuals) == pytest.approx(0, abs=1e-9)


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        fit_extrapolation([(1, 10)])
    with pytest.raises(ValueError):
        fit_affine([2, 2], [1, 3])


def test_quadratic_scale_fit():
    c, r2 = fit_quadratic_scale([1, 2, 3], [3, 12, 27])
    assert c == pytest.approx(3) and r2 == pytest.approx(1)


def test_primitive_report_matches_stats():
    report = bench_primitives(4, seed=0, repeats=2)
    assert [r["primitive"] for r in report.rows] == ["compare"] * 2 + ["select"] * 2 + ["order"] * 2
    for row in report.rows:
        assert row["gates"] == sum(row["gate_counts"].values())
        assert row["gates"] == primitive_gate_count(row["primitive"], 4)
        assert row["peak_rss_bytes"] > 0
    kinds = {"compare": "comparisons", "select": "selections", "order": "orderings"}
    for row in report.rows:
        assert row["blind_ops"] == {k: int(k == kinds[row["primitive"]]) for k in kinds.values()}


def test_report_serialization(tmp_path):
    report = BenchReport("x", {"a": 1}, [{"p": "q", "n": {"k": 2}}], {"f": {"slope": 1}})
    report.write(tmp_path / "r.json", tmp_path / "r.csv")
    assert json.loads((tmp_path / "r.json").read_text())["rows"][0]["n"]["k"] == 2
    assert (tmp_path / "r.csv").read_text() == "p,n.k\nq,2\n"


def test_gate_counts_are_data_independent():
    assert sort_gate_count(4) == sort_gate_count(4)
    assert primitive_gate_count("select", 7) == 7
