"""Timing, memory and gate-count measurement, plus least-squares extrapolation."""
from __future__ import annotations

import csv
import io
import json
import random
import resource
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from blindeval.algos import KeyedTuple, blind_sort
from blindeval.backend import BackendStats, Client, Evaluator, SecurityConfig, keygen
from blindeval.core import ASCENDING, blind_compare, blind_order, blind_select_word
from blindeval.data import gen_synthetic
from blindeval.tree import EncryptedDataset, predict_rows, train

PRIMITIVES = ("compare", "select", "order")


def peak_rss_bytes() -> int:
    """Peak resident set size of this process so far."""
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return rss if sys.platform == "darwin" else rss * 1024  # linux reports KiB


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    residuals: list[float]

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "residuals": self.residuals,
        }


def _r_squared(y, pred) -> float:
    y = np.asarray(y, dtype=float)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def fit_affine(xs, ys) -> LinearFit:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or len(xs) != len(ys):
        raise ValueError("an affine fit needs at least 2 (x, y) points")
    if np.ptp(xs) == 0:
        raise ValueError("an affine fit needs at least 2 distinct x values")
    A = np.column_stack([xs, np.ones_like(xs)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ys, rcond=None)
    pred = slope * xs + intercept
    return LinearFit(float(slope), float(intercept), _r_squared(ys, pred), (ys - pred).tolist())


def fit_quadratic_scale(xs, ys) -> tuple[float, float]:
    """Fit ``y = c * x**2`` (no other terms); returns (c, R²)."""
    x2 = np.asarray(xs, dtype=float) ** 2
    ys = np.asarray(ys, dtype=float)
    if len(x2) < 2:
        raise ValueError("need at least 2 points")
    c = float(x2 @ ys / (x2 @ x2))
    return c, _r_squared(ys, c * x2)


def fit_extrapolation(series, project_depths=()) -> dict:
    """Affine least-squares fit of (depth, seconds) pairs and its projection."""
    series = list(series)
    if len(series) < 2:
        raise ValueError("extrapolation needs at least 2 points")
    xs, ys = zip(*series)
    fit = fit_affine(xs, ys)
    return {
        **fit.as_dict(),
        "projection": [[int(d), float(fit(d))] for d in project_depths],
    }


@dataclass
class BenchReport:
    kind: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "config": self.config, "rows": self.rows, "fits": self.fits}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """Tidy table: one line per row; nested dicts are flattened with dots."""
        flat = [_flatten(r) for r in self.rows]
        cols = []
        for r in flat:
            cols.extend(k for k in r if k not in cols)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(flat)
        return buf.getvalue()

    def write(self, json_path=None, csv_path=None) -> None:
        if json_path:
            Path(json_path).write_text(self.to_json())
        if csv_path:
            Path(csv_path).write_text(self.to_csv())


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _session(backend, seed, insecure):
    config = SecurityConfig(backend=backend, rng_seed=seed, insecure_test_mode=insecure)
    pair = keygen(config)
    stats = BackendStats()
    return Client(pair.client_key, stats), Evaluator(pair.evaluation_key, stats), stats


def _measure(stats, fn):
    before = stats.snapshot()
    t0 = time.perf_counter()
    out = fn()
    seconds = time.perf_counter() - t0
    delta = stats.diff(before)
    return out, {
        "seconds": seconds,
        "gates": sum(delta["gate_counts"].values()),
        "gate_counts": delta["gate_counts"],
        "blind_ops": delta["blind_ops"],
        "decrypt_calls": delta["decrypt_calls"],
        "peak_rss_bytes": peak_rss_bytes(),
    }


def bench_primitives(
    bits: int = 4,
    backend: str = "clear",
    *,
    repeats: int = 1,
    seed: int | None = None,
    insecure_test_mode: bool = False,
) -> BenchReport:
    """One row per primitive (compare, select, order) on ``bits``-wide inputs."""
    if bits < 1 or repeats < 1:
        raise ValueError("bits and repeats must be at least 1")
    rng = random.Random(seed)
    client, ev, stats = _session(backend, seed, insecure_test_mode)

    def word():
        return client.encrypt_word(rng.randrange(2**bits), bits)

    ops = {
        "compare": lambda a, b, s: blind_compare(ev, a, b),
        "select": lambda a, b, s: blind_select_word(ev, s, a, b),
        "order": lambda a, b, s: blind_order(ev, a, b, ASCENDING),
    }
    report = BenchReport("primitives", {"bits": bits, "backend": backend, "repeats": repeats})
    for name in PRIMITIVES:
        for _ in range(repeats):
            a, b, s = word(), word(), client.encrypt_bit(rng.randrange(2))
            _, row = _measure(stats, lambda: ops[name](a, b, s))
            report.rows.append({"primitive": name, "bits": bits, **row})
    return report


def bench_tree(
    depths=(1, 2),
    *,
    n: int = 20,
    m: int = 4,
    backend: str = "clear",
    seed: int | None = None,
    insecure_test_mode: bool = False,
    project_depths=(),
) -> BenchReport:
    """Train and predict on a synthetic dataset for each depth; fit time vs depth."""
    depths = list(depths)
    if any(d < 1 or d > m for d in depths):
        raise ValueError(f"depths must lie in 1..{m}")
    plain = gen_synthetic(n, m, planted_feature=0, signal=0.9, seed=seed)
    client, ev, stats = _session(backend, seed, insecure_test_mode)
    ds = EncryptedDataset.encrypt(client, plain.X, plain.y)
    report = BenchReport("tree", {"n": n, "m": m, "backend": backend, "depths": depths})
    for d in depths:
        tree, t_row = _measure(stats, lambda: train(ev, ds, d))
        _, p_row = _measure(stats, lambda: predict_rows(ev, tree, ds.features))
        report.rows.append({"depth": d, "phase": "train", **t_row})
        report.rows.append({"depth": d, "phase": "predict", **p_row})
    if len(depths) >= 2:
        for phase in ("train", "predict"):
            pts = [(r["depth"], r["seconds"]) for r in report.rows if r["phase"] == phase]
            report.fits[phase] = fit_extrapolation(pts, project_depths)
    return report


# --------------------------------------------------------------------------
# gate-count series (clear backend; counts are backend-independent)


def primitive_gate_count(name: str, width: int) -> int:
    client, ev, stats = _session("clear", 0, False)
    a = client.encrypt_word(0, width)
    b = client.encrypt_word(0, width)
    s = client.encrypt_bit(0)
    fn = {
        "compare": lambda: blind_compare(ev, a, b),
        "select": lambda: blind_select_word(ev, s, a, b),
        "order": lambda: blind_order(ev, a, b, ASCENDING),
    }[name]
    return _measure(stats, fn)[1]["gates"]


def sort_gate_count(length: int, key_width: int = 4, payload_width: int = 1) -> int:
    client, ev, stats = _session("clear", 0, False)
    items = [
        KeyedTuple(client.encrypt_word(0, key_width), client.encrypt_word(0, payload_width))
        for _ in range(length)
    ]
    return _measure(stats, lambda: blind_sort(ev, items))[1]["gates"]
