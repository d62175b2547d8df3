"""Throughput benchmarks for the online/progressive kernels.

Reproduces the reference measurement protocol: per-slice change-detection
update time as the entity count grows, and entities (or VAR sample
points) processed inside a one-second latency envelope as the window
length (or metric count) grows. Absolute numbers are hardware-bound; the
suite asserts only the monotone trends and embeds the configuration plus
machine info so runs stay comparable.
"""

from __future__ import annotations

import json
import os
import platform
import time

import numpy as np

from .causality import RepresentativePanel, progressive_var_fit
from .changepoint import MetricChangeDetector
from .clustering import ClusterModel, refresh
from .projection import DrState, refresh_layout

__all__ = ["bench_cpd", "bench_clustering", "bench_dr", "bench_var", "bench_tick", "run_suite"]


def machine_info() -> dict:
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "cpus": os.cpu_count(),
    }


def bench_cpd(entity_counts=(100, 1_000, 10_000, 100_000), slices=1_000, seed=0) -> list[dict]:
    """Mean/p95 per-slice pipeline update time for growing entity counts."""
    out = []
    for n in entity_counts:
        rng = np.random.default_rng(seed)
        detector = MetricChangeDetector(n=n)
        data = rng.normal(size=(min(slices, 64), n))  # reuse rows to keep RAM flat
        times = np.empty(slices)
        for i in range(slices):
            x = data[i % data.shape[0]]
            start = time.perf_counter()
            detector.push_slice(x, i)
            times[i] = time.perf_counter() - start
        out.append(
            {
                "n": int(n),
                "slices": int(slices),
                "mean_ms": float(times.mean() * 1e3),
                "p95_ms": float(np.quantile(times, 0.95) * 1e3),
            }
        )
    return out


def bench_clustering(t_values=(100, 1_000, 10_000), n=2_000, budget=1.0, k=3, seed=0) -> list[dict]:
    """Entities absorbed per second of mini-batch refresh vs window length."""
    out = []
    for t in t_values:
        rng = np.random.default_rng(seed)
        window = rng.normal(size=(n, t))
        model = ClusterModel(k=k, seed=seed)
        model = refresh(model, window, budget=0.0)  # seed centers only
        start = time.perf_counter()
        model = refresh(model, window, budget=budget)
        elapsed = max(time.perf_counter() - start, 1e-9)
        out.append(
            {
                "t": int(t),
                "n": int(n),
                "processed": int(model.processed_count),
                "entities_per_s": float(model.processed_count / min(elapsed, budget) if model.processed_count else 0.0),
            }
        )
    return out


def bench_dr(t_values=(100, 1_000, 10_000), n=2_000, budget=1.0, seed=0) -> list[dict]:
    """Entities absorbed per second of projection refresh vs window length."""
    out = []
    for t in t_values:
        rng = np.random.default_rng(seed)
        window = rng.normal(size=(n, t))
        state = DrState(seed=seed)
        start = time.perf_counter()
        refresh_layout(state, window, None, budget=budget)
        elapsed = max(time.perf_counter() - start, 1e-9)
        out.append(
            {
                "t": int(t),
                "n": int(n),
                "processed": int(state.processed_count),
                "entities_per_s": float(state.processed_count / min(elapsed, budget) if state.processed_count else 0.0),
            }
        )
    return out


def bench_var(d_values=(10, 100, 1_000), t=10_000, budget=1.0, seed=0) -> list[dict]:
    """VAR sample points fitted inside the budget vs metric count."""
    out = []
    for d in d_values:
        rng = np.random.default_rng(seed)
        panel = RepresentativePanel(d)
        for row in rng.normal(size=(t, d)):
            panel.append(row)
        model = progressive_var_fit(
            panel, latency_budget=budget, rng=np.random.default_rng(seed)
        )
        out.append(
            {
                "d": int(d),
                "t": int(t),
                "points": int(model.s if model else 0),
                "refits": int(model.refits if model else 0),
                "final_fit_ms": float(model.fit_time * 1e3) if model else 0.0,
            }
        )
    return out


def bench_tick(n=256, d=5, slices=60, seed=0, interval=1.0) -> dict:
    """End-to-end tick latency for the reference workload (n entities,
    d metrics): every analysis stage runs per sealed slice."""
    from .engine import AnalysisEngine, SessionState
    from .tensor_store import TensorStore

    rng = np.random.default_rng(seed)
    store = TensorStore(n=n, metric_names=[f"m{i}" for i in range(d)])
    session = SessionState(top_metric=0, bottom_metric=min(1, d - 1))
    engine = AnalysisEngine(store, session=session, seed=seed)
    ticks: list[float] = []
    store.subscribe(lambda t: ticks.append(engine.tick(t).payload["diagnostics"]["tick_ms"]))
    offsets = 10.0 * (np.arange(n) % 3)
    for t in range(slices):
        grid = offsets[:, None] + rng.normal(size=(n, d))
        for e in range(n):
            store.ingest_record(t, e, grid[e])
    arr = np.asarray(ticks)
    return {
        "n": n,
        "d": d,
        "slices": slices,
        "interval_ms": interval * 1e3,
        "mean_ms": float(arr.mean()),
        "max_ms": float(arr.max()),
        "within_interval": bool(arr.max() <= interval * 1e3),
    }


def _non_increasing(values) -> bool:
    return all(a >= b for a, b in zip(values, values[1:]))


def run_suite(
    suite: str = "table1",
    cpd_entities=(100, 1_000, 10_000, 100_000),
    cpd_slices: int = 1_000,
    n: int = 2_000,
    t_values=(100, 1_000, 10_000),
    var_d=(10, 100, 1_000),
    var_t: int = 10_000,
    budget: float = 1.0,
    seed: int = 0,
) -> dict:
    """Run one or all benchmark tables; returns the machine-readable report."""
    report = {
        "suite": suite,
        "machine": machine_info(),
        "config": {
            "cpd_entities": list(cpd_entities),
            "cpd_slices": cpd_slices,
            "n": n,
            "t_values": list(t_values),
            "var_d": list(var_d),
            "var_t": var_t,
            "budget_s": budget,
            "seed": seed,
        },
        "tables": {},
        "trends": {},
    }
    tables = report["tables"]
    trends = report["trends"]
    if suite in ("table1", "cpd"):
        tables["a"] = {"name": "online change detection", "rows": bench_cpd(cpd_entities, cpd_slices, seed)}
        trends["cpd_time_non_decreasing_in_n"] = _non_increasing(
            [-row["mean_ms"] for row in tables["a"]["rows"]]
        )
    if suite in ("table1", "clustering"):
        tables["b"] = {"name": "progressive clustering", "rows": bench_clustering(t_values, n, budget, seed=seed)}
        trends["clustering_non_increasing_in_t"] = _non_increasing(
            [row["entities_per_s"] for row in tables["b"]["rows"]]
        )
    if suite in ("table1", "dr"):
        tables["c"] = {"name": "progressive projection", "rows": bench_dr(t_values, n, budget, seed=seed)}
        trends["dr_non_increasing_in_t"] = _non_increasing(
            [row["entities_per_s"] for row in tables["c"]["rows"]]
        )
    if suite in ("table1", "var"):
        tables["d"] = {"name": "progressive VAR fitting", "rows": bench_var(var_d, var_t, budget, seed=seed)}
        trends["var_points_non_increasing_in_d"] = _non_increasing(
            [row["points"] for row in tables["d"]["rows"]]
        )
    if suite == "tick":
        tables["tick"] = {"name": "end-to-end tick latency", "rows": [bench_tick(seed=seed)]}
        trends["tick_within_interval"] = tables["tick"]["rows"][0]["within_interval"]
    if not tables:
        raise ValueError(f"unknown suite {suite!r}")
    report["trends_ok"] = all(trends.values())
    return report


def format_report(report: dict) -> str:
    return json.dumps(report, indent=2)
