"""Per-slice analysis orchestration and frame assembly.

One engine owns every algorithm state (representative series, detectors,
cluster model, projection states, causality panel) and advances them in a
fixed order each time a slice seals: change detection per enabled metric,
cluster refresh, layout refreshes, then (every few ticks) the causality
fit. The result is an AnalysisFrame: a self-contained bundle a client can
render from scratch. A failing stage degrades its frame section to the
previous value with a staleness tag; the tick itself never aborts.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .causality import RepresentativePanel, build_report, progressive_var_fit
from .changepoint import DetectorState, RepresentativeSeriesState
from .clustering import ClusterModel, refresh
from .projection import DrState, refresh_layout
from .tensor_store import TensorStore

logger = logging.getLogger(__name__)

__all__ = ["SessionState", "AnalysisFrame", "AnalysisEngine", "SettingError"]

_SECTIONS = ("change_detect", "clusters", "layout_top", "layout_bottom", "causality", "comm")


class SettingError(ValueError):
    """An interactive setting change that fails validation."""


@dataclass
class SessionState:
    """Every knob a client may change at runtime. One shared session."""

    paused: bool = False
    base_time: int = 0
    top_metric: int = 0
    bottom_metric: int = 0
    cluster_metric: int | None = None  # None follows top_metric
    k: int = 3
    alpha: float = 0.01
    cpd_bottom: bool = False
    cluster_budget: float = 0.05  # seconds
    dr_budget: float = 0.001
    var_budget: float = 0.1
    causality_cadence: int = 5
    causality_direction: str = "from"
    p_threshold: float = 0.05
    ir_horizon: int = 10
    var_lag: int = 1
    aggregation_level: int = 0
    selection: list[int] = field(default_factory=list)

    def clustered_metric(self) -> int:
        return self.top_metric if self.cluster_metric is None else self.cluster_metric

    def to_payload(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["selection"] = list(self.selection)
        return out


def _positive(value) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise SettingError("value must be a positive number")
    return value


@dataclass
class AnalysisFrame:
    t: int
    payload: dict


def _decimate(values: np.ndarray, limit: int) -> np.ndarray:
    """Stride-downsample the trailing axis to at most ``limit`` points."""
    length = values.shape[-1]
    if length <= limit:
        return values
    idx = np.linspace(0, length - 1, limit).round().astype(int)
    return values[..., idx]


class AnalysisEngine:
    """Owns all analysis state for one stream; single-threaded by design."""

    def __init__(
        self,
        store: TensorStore,
        session: SessionState | None = None,
        seed: int = 0,
        max_diff_matrices: int = 32,
        decimate_points: int = 512,
    ):
        self.store = store
        self.session = session or SessionState()
        if store.d > 1 and self.session.bottom_metric == self.session.top_metric:
            self.session.bottom_metric = (self.session.top_metric + 1) % store.d
        self.seed = seed
        self.max_diff_matrices = max_diff_matrices
        self.decimate_points = decimate_points

        self.rep_states = [RepresentativeSeriesState(store.n) for _ in range(store.d)]
        self.detectors: dict[int, DetectorState] = {}
        self.panel = RepresentativePanel(store.d)
        self.cluster = ClusterModel(k=self.session.k, seed=seed)
        self._cluster_metric_in_use: int | None = None
        self._reseed_requested = False
        self.dr_top = DrState(seed=seed + 1)
        self.dr_bottom = DrState(seed=seed + 2)
        self.var_model = None
        self.report = None
        self._report_age = 0
        self._prev_s: int | None = None
        self.change_points: list[dict] = []
        self._ordinal = 0
        self.ticks = 0
        self._section_age = {name: -1 for name in _SECTIONS}
        self._last_sections: dict = {}
        self.latest_frame: AnalysisFrame | None = None
        self.store.pin_comm(self.session.base_time)

    # ------------------------------------------------------------ settings

    def apply_setting(self, key: str, value) -> None:
        """Validate and apply one session setting; raises SettingError."""
        session = self.session
        d = self.store.d
        if key in ("top_metric", "bottom_metric", "cluster_metric"):
            if key == "cluster_metric" and value is None:
                if session.clustered_metric() != session.top_metric:
                    self._reseed_requested = True
                session.cluster_metric = None
                return
            metric = int(value)
            if not 0 <= metric < d:
                raise SettingError(f"metric index must be in [0, {d})")
            if key == "cluster_metric" and metric != session.clustered_metric():
                self._reseed_requested = True
            if key == "top_metric" and session.cluster_metric is None and metric != session.top_metric:
                self._reseed_requested = True
            setattr(session, key, metric)
        elif key == "k":
            k = int(value)
            if not 1 <= k <= self.store.n:
                raise SettingError(f"k must be in [1, {self.store.n}]")
            if k != session.k:
                session.k = k
                self._reseed_requested = True
        elif key == "alpha":
            alpha = float(value)
            if not 0.0 <= alpha <= 1.0:
                raise SettingError("alpha must be in [0, 1]")
            session.alpha = alpha
            for det in self.detectors.values():
                det.set_alpha(alpha)  # future detections only
        elif key == "base_time":
            t = int(value)
            if self.store.t_total and not t < self.store.t_total:
                raise SettingError(f"base_time must be <= current time {self.store.t_total - 1}")
            if t < 0:
                raise SettingError("base_time must be >= 0")
            self.store.unpin_comm(session.base_time)
            session.base_time = t
            self.store.pin_comm(t)
        elif key in ("cluster_budget", "dr_budget", "var_budget"):
            setattr(session, key, _positive(value))
        elif key == "causality_cadence":
            cadence = int(value)
            if cadence < 1:
                raise SettingError("cadence must be >= 1 ticks")
            session.causality_cadence = cadence
        elif key == "causality_direction":
            if value not in ("from", "to"):
                raise SettingError("direction must be 'from' or 'to'")
            session.causality_direction = value
        elif key == "p_threshold":
            p = float(value)
            if not 0.0 < p < 1.0:
                raise SettingError("p threshold must be in (0, 1)")
            session.p_threshold = p
        elif key == "ir_horizon":
            h = int(value)
            if not 1 <= h <= 100:
                raise SettingError("horizon must be in [1, 100]")
            session.ir_horizon = h
        elif key == "var_lag":
            p = int(value)
            if not 1 <= p <= 4:
                raise SettingError("lag order must be in [1, 4]")
            session.var_lag = p
        elif key == "aggregation_level":
            level = int(value)
            if not 0 <= level <= self.store.depth:
                raise SettingError(f"aggregation level must be in [0, {self.store.depth}]")
            session.aggregation_level = level
        elif key == "cpd_bottom":
            session.cpd_bottom = bool(value)
        elif key == "paused":
            session.paused = bool(value)
        else:
            raise SettingError(f"unknown setting {key!r}")

    def select_entities(self, entities) -> None:
        picked = sorted({int(e) for e in entities})
        if picked and not (0 <= picked[0] and picked[-1] < self.store.n):
            raise SettingError("selection contains unknown entities")
        self.session.selection = picked

    # ---------------------------------------------------------------- tick

    def _enabled_cpd_metrics(self) -> list[int]:
        metrics = [self.session.top_metric]
        if self.session.cpd_bottom and self.session.bottom_metric != self.session.top_metric:
            metrics.append(self.session.bottom_metric)
        return metrics

    def _run_stage(self, name: str, fn):
        try:
            result = fn()
        except Exception:
            logger.exception("stage %s failed at tick %d; serving stale section", name, self.ticks)
            self._section_age[name] = max(self._section_age[name], 0) + 1
            return self._last_sections.get(name)
        self._section_age[name] = 0
        self._last_sections[name] = result
        return result

    def tick(self, t: int) -> AnalysisFrame:
        """Advance every analysis on the sealed slice at time ``t``."""
        started = time.perf_counter()
        session = self.session
        slice_grid = self.store.slice_values(t)

        def stage_change_detect():
            enabled = self._enabled_cpd_metrics()
            for m in range(self.store.d):
                rep = self.rep_states[m].push(slice_grid[:, m])
                if rep is None:
                    continue
                if m in enabled:
                    det = self.detectors.get(m)
                    if det is None:
                        det = self.detectors[m] = DetectorState(alpha=session.alpha)
                    if det.push(rep, t=t):
                        self._ordinal += 1
                        self.change_points.append(
                            {"metric": m, "t": t, "ordinal": self._ordinal}
                        )
                        self.store.pin_comm(t)
                        extra = len(self.change_points) - self.max_diff_matrices
                        if extra > 0:
                            for old in self.change_points[:extra]:
                                self.store.unpin_comm(old["t"])
                            del self.change_points[:extra]
            row = [state.series[-1] if state.series else 0.0 for state in self.rep_states]
            self.panel.append(row)
            return list(self.change_points)

        def stage_clusters():
            metric = session.clustered_metric()
            window = self.store.window_matrix(metric)
            if self._reseed_requested or metric != self._cluster_metric_in_use:
                self.cluster = ClusterModel(k=session.k, seed=self.seed)
                self._cluster_metric_in_use = metric
                self._reseed_requested = False
            self.cluster = refresh(self.cluster, window, budget=session.cluster_budget)
            return {
                "assignments": self.cluster.assignments.astype(int).tolist(),
                "sizes": self.cluster.cluster_sizes().astype(int).tolist(),
                "processed": int(self.cluster.processed_count),
                "reseeded": bool(self.cluster.reseeded),
            }

        def make_layout_stage(state: DrState, metric: int):
            def run():
                window = self.store.window_matrix(metric)
                labels = (
                    self.cluster.assignments
                    if self.cluster.assignments is not None
                    and len(self.cluster.assignments) == window.shape[0]
                    else None
                )
                layout = refresh_layout(state, window, labels, budget=session.dr_budget)
                return {
                    "epoch": layout.epoch,
                    "positions": np.round(layout.positions, 6).tolist(),
                    "processed": int(state.processed_count),
                    "reset": bool(state.reset),
                }

            return run

        def stage_causality():
            due = self.ticks % session.causality_cadence == 0
            fitted = False
            if due:
                model = progressive_var_fit(
                    self.panel,
                    latency_budget=session.var_budget,
                    prev_s=self._prev_s,
                    p=session.var_lag,
                    rng=np.random.default_rng((self.seed, self.ticks)),
                )
                if model is not None:
                    self.var_model = model
                    self._prev_s = model.suggested_s
                    self.report = build_report(
                        model,
                        target=session.top_metric,
                        direction=session.causality_direction,
                        p_threshold=session.p_threshold,
                        ir_summary_horizon=session.ir_horizon,
                    )
                    fitted = True
            if self.report is None:
                return None
            self._report_age = 0 if fitted else self._report_age + 1
            report = self.report
            return {
                "target": report.target,
                "direction": report.direction,
                "staleness": self._report_age,
                "rows": [
                    {
                        "metric": row.metric,
                        "granger_p": row.granger_p,
                        "significant": row.significant,
                        "ir": row.ir,
                        "vd": row.vd,
                    }
                    for row in report.rows
                ],
                "p_threshold": report.p_threshold,
                "fit": {
                    "s": int(self.var_model.s),
                    "fit_ms": round(self.var_model.fit_time * 1e3, 3),
                    "refits": int(self.var_model.refits),
                    "ridge": bool(self.var_model.ridge),
                },
            }

        sections = {}
        sections["change_detect"] = self._run_stage("change_detect", stage_change_detect)
        sections["clusters"] = self._run_stage("clusters", stage_clusters)
        sections["layout_top"] = self._run_stage(
            "layout_top", make_layout_stage(self.dr_top, session.top_metric)
        )
        sections["layout_bottom"] = self._run_stage(
            "layout_bottom", make_layout_stage(self.dr_bottom, session.bottom_metric)
        )
        sections["causality"] = self._run_stage("causality", stage_causality)
        sections["comm"] = self._run_stage("comm", lambda: self.comm_section(t))

        self.ticks += 1
        frame = AnalysisFrame(t, self._assemble(t, sections, started))
        self.latest_frame = frame
        return frame

    # ------------------------------------------------------------ assembly

    def _agg_entries(self, t: int) -> list[list[float]]:
        frame = self.store.comm_frame(t)
        level = self.session.aggregation_level
        if level < frame.aggregation_level:
            frame = self.store.aggregate_comm(frame, level)
        return frame.entries()

    def comm_section(self, t: int) -> dict:
        level = self.session.aggregation_level
        base_t = self.session.base_time
        base_entries = self._agg_entries(base_t)
        base_map = {(int(i), int(j)): w for i, j, w in base_entries}
        diffs = []
        for cp in self.change_points:
            cp_entries = self._agg_entries(cp["t"])
            cells = {(int(i), int(j)): w for i, j, w in cp_entries}
            keys = set(cells) | set(base_map)
            entries = [
                [i, j, cells.get((i, j), 0.0) - base_map.get((i, j), 0.0)]
                for i, j in sorted(keys)
            ]
            diffs.append({"t": cp["t"], "ordinal": cp["ordinal"], "entries": entries})
        return {
            "level": level,
            "dim": self.store.group_count(level),
            "group_of": self.store.group_index(level).astype(int).tolist(),
            "live": {"t": t, "entries": self._agg_entries(t)},
            "base": {"t": base_t, "entries": base_entries},
            "diffs": diffs,
        }

    def _assemble(self, t: int, sections: dict, started: float) -> dict:
        session = self.session
        store = self.store
        limit = self.decimate_points

        def window_block(metric: int) -> dict:
            window = store.window_matrix(metric)
            times = store.window_times()
            return {
                "metric": metric,
                "times": _decimate(times, limit).tolist(),
                "values": np.round(_decimate(window, limit), 6).tolist(),
            }

        summary = store.summary_matrix()
        summary_times = np.arange(summary.shape[0])
        freshness = {
            name: {"fresh": self._section_age[name] == 0, "age": max(self._section_age[name], 0)}
            for name in _SECTIONS
        }
        clusters = sections.get("clusters") or {}
        payload = {
            "t": t,
            "meta": {
                "n": store.n,
                "metrics": store.metric_names,
                "level_sizes": [store.group_count(v) for v in range(store.depth + 1)],
                "window_capacity": store.window_capacity,
            },
            "settings": {
                "top_metric": session.top_metric,
                "bottom_metric": session.bottom_metric,
                "cluster_metric": session.clustered_metric(),
                "k": session.k,
                "alpha": session.alpha,
                "base_time": session.base_time,
                "aggregation_level": session.aggregation_level,
                "causality_direction": session.causality_direction,
                "selection": list(session.selection),
                "paused": session.paused,
            },
            "window": {
                "top": window_block(session.top_metric),
                "bottom": window_block(session.bottom_metric),
            },
            "summary": {
                "times": _decimate(summary_times, limit).tolist(),
                "top": np.round(_decimate(summary[:, session.top_metric], limit), 6).tolist(),
                "bottom": np.round(
                    _decimate(summary[:, session.bottom_metric], limit), 6
                ).tolist(),
            },
            "change_points": sections.get("change_detect") or [],
            "clusters": clusters.get("assignments", []),
            "cluster_sizes": clusters.get("sizes", []),
            "layouts": {
                "top": sections.get("layout_top"),
                "bottom": sections.get("layout_bottom"),
            },
            "causality": sections.get("causality"),
            "comm": sections.get("comm"),
            "freshness": freshness,
            "diagnostics": {
                "tick_ms": round((time.perf_counter() - started) * 1e3, 3),
                "cluster_processed": clusters.get("processed", 0),
                "cluster_reseeded": clusters.get("reseeded", False),
                "duplicates": store.duplicates,
                "dropped": store.dropped,
                "forward_filled": store.filled_entities,
            },
        }
        return payload

    def snapshot_payload(self) -> dict:
        """Self-contained state for a newly connected client."""
        frame = self.latest_frame
        if frame is not None and self._section_age["comm"] == 0:
            # refresh the comm section so base-time changes show up
            # immediately, even between ticks
            payload = dict(frame.payload)
            try:
                payload["comm"] = self.comm_section(frame.t)
                payload["settings"] = dict(payload["settings"])
                payload["settings"]["base_time"] = self.session.base_time
                payload["settings"]["aggregation_level"] = self.session.aggregation_level
                payload["settings"]["selection"] = list(self.session.selection)
                payload["settings"]["paused"] = self.session.paused
            except Exception:
                logger.exception("snapshot comm refresh failed")
            frame = AnalysisFrame(frame.t, payload)
        return {
            "session": self.session.to_payload(),
            "frame": frame.payload if frame is not None else None,
        }
