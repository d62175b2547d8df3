"""Deterministic synthetic PDES-style telemetry generator and replayer.

Emits the ingest wire format (preamble line, then one JSON record per
line) for a configurable population of processing elements, each holding
a fixed number of kernel processes. Metric values follow per-group
trajectories (base level plus an optional AR(1) common component) with
per-entity Gaussian noise truncated at zero, and support planted events:
level shifts, transient peaks, persistent outlier entities, and
self-communication hot spots. An optional lagged coupling feeds one
metric into another to plant a causal direction.

A fixed seed reproduces the stream byte for byte.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

__all__ = ["METRIC_NAMES", "Scenario", "record_lines", "generate", "replay", "parse_line"]

METRIC_NAMES = ["Prim.Rb.", "Sec.Rb.", "Net.Send.", "Net.Recv.", "Num.Events"]

_EVENT_TYPES = {"level_shift", "transient_peak", "outlier_entity", "comm_hotspot"}


@dataclass
class Scenario:
    seed: int = 0
    pes: int = 8
    kps_per_pe: int = 16
    duration: int = 300
    interval: float = 1.0
    group_count: int = 3
    # per metric: one base level per group
    group_levels: dict[str, list[float]] = field(default_factory=dict)
    # per metric: entity noise scale
    sigma: dict[str, float] = field(default_factory=dict)
    # per metric: (rho, scale) AR(1) common trajectory shared inside a group
    ar1: dict[str, tuple[float, float]] = field(default_factory=dict)
    # (src metric, dst metric, gain, lag)
    coupling: tuple[str, str, float, int] | None = None
    events: list[dict] = field(default_factory=list)
    comm_within_pe: int = 12
    comm_cross_pe: int = 4
    comm_weight: float = 4.0

    def __post_init__(self):
        defaults_levels = {
            "Prim.Rb.": [5.0, 12.0, 20.0],
            "Sec.Rb.": [10.0, 40.0, 70.0],
            "Net.Send.": [40.0, 60.0, 80.0],
            "Net.Recv.": [45.0, 55.0, 75.0],
            "Num.Events": [900.0, 1000.0, 1100.0],
        }
        defaults_sigma = {
            "Prim.Rb.": 1.0,
            "Sec.Rb.": 1.5,
            "Net.Send.": 2.0,
            "Net.Recv.": 2.0,
            "Num.Events": 15.0,
        }
        for m in METRIC_NAMES:
            levels = self.group_levels.setdefault(m, defaults_levels[m])
            if len(levels) < self.group_count:
                # cycle the defaults out to the requested group count
                self.group_levels[m] = [
                    levels[g % len(levels)] + 30.0 * (g // len(levels))
                    for g in range(self.group_count)
                ]
            self.sigma.setdefault(m, defaults_sigma[m])

    @property
    def n(self) -> int:
        return self.pes * self.kps_per_pe

    @property
    def d(self) -> int:
        return len(METRIC_NAMES)

    def group_of(self) -> np.ndarray:
        """Contiguous split of entities into behavior groups."""
        return (np.arange(self.n) * self.group_count) // self.n

    def hierarchy(self) -> list[list[int]]:
        return [[e // self.kps_per_pe, e % self.kps_per_pe] for e in range(self.n)]

    def validate(self) -> None:
        if self.pes < 1 or self.kps_per_pe < 1:
            raise ValueError("need at least one PE and one KP per PE")
        if self.duration < 1:
            raise ValueError("duration must be >= 1 slices")
        if self.interval < 0:
            raise ValueError("interval must be >= 0")
        if not 1 <= self.group_count <= self.n:
            raise ValueError("group_count must be in [1, n]")
        for m in METRIC_NAMES:
            if len(self.group_levels[m]) < self.group_count:
                raise ValueError(f"metric {m} needs {self.group_count} group levels")
        if self.coupling is not None:
            src, dst, gain, lag = self.coupling
            if src not in METRIC_NAMES or dst not in METRIC_NAMES:
                raise ValueError(f"unknown coupling metric: {src} -> {dst}")
            if lag < 1:
                raise ValueError("coupling lag must be >= 1")
        for ev in self.events:
            kind = ev.get("type")
            if kind not in _EVENT_TYPES:
                raise ValueError(f"unknown event type {kind!r}")
            if kind != "comm_hotspot" and ev.get("metric") not in METRIC_NAMES:
                raise ValueError(f"event names unknown metric {ev.get('metric')!r}")
            for key in ("t", "from_t", "to_t"):
                if key in ev and ev[key] is not None and ev[key] < 0:
                    raise ValueError(f"event time {key} must be >= 0")

    # ------------------------------------------------------------ JSON I/O

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        raw = json.loads(text)
        coupling = raw.get("coupling")
        if coupling is not None:
            coupling = (
                coupling["src"],
                coupling["dst"],
                float(coupling.get("gain", 0.5)),
                int(coupling.get("lag", 1)),
            )
        scenario = cls(
            seed=int(raw.get("seed", 0)),
            pes=int(raw.get("pes", 8)),
            kps_per_pe=int(raw.get("kps_per_pe", 16)),
            duration=int(raw.get("duration", 300)),
            interval=float(raw.get("interval", 1.0)),
            group_count=int(raw.get("group_count", 3)),
            group_levels={k: list(map(float, v)) for k, v in raw.get("group_levels", {}).items()},
            sigma={k: float(v) for k, v in raw.get("sigma", {}).items()},
            ar1={k: (float(v[0]), float(v[1])) for k, v in raw.get("ar1", {}).items()},
            coupling=coupling,
            events=list(raw.get("events", [])),
            comm_within_pe=int(raw.get("comm_within_pe", 12)),
            comm_cross_pe=int(raw.get("comm_cross_pe", 4)),
            comm_weight=float(raw.get("comm_weight", 4.0)),
        )
        scenario.validate()
        return scenario

    def to_json(self) -> str:
        out = {
            "seed": self.seed,
            "pes": self.pes,
            "kps_per_pe": self.kps_per_pe,
            "duration": self.duration,
            "interval": self.interval,
            "group_count": self.group_count,
            "group_levels": self.group_levels,
            "sigma": self.sigma,
            "ar1": {k: list(v) for k, v in self.ar1.items()},
            "events": self.events,
            "comm_within_pe": self.comm_within_pe,
            "comm_cross_pe": self.comm_cross_pe,
            "comm_weight": self.comm_weight,
        }
        if self.coupling is not None:
            src, dst, gain, lag = self.coupling
            out["coupling"] = {"src": src, "dst": dst, "gain": gain, "lag": lag}
        return json.dumps(out, indent=2)


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def record_lines(scenario: Scenario) -> Iterator[str]:
    """Deterministic NDJSON stream: preamble, then metric/comm records."""
    scenario.validate()
    rng = np.random.default_rng(scenario.seed)
    n, d = scenario.n, scenario.d
    groups = scenario.group_of()
    metric_idx = {m: i for i, m in enumerate(METRIC_NAMES)}

    yield _dumps(
        {
            "n": n,
            "metrics": METRIC_NAMES,
            "hierarchy": scenario.hierarchy(),
            "interval": scenario.interval,
        }
    )

    ar_state = np.zeros((d, scenario.group_count))
    prev_values: np.ndarray | None = None
    for t in range(scenario.duration):
        values = np.empty((n, d))
        for m, name in enumerate(METRIC_NAMES):
            rho, scale = scenario.ar1.get(name, (0.0, 0.0))
            if scale > 0.0:
                ar_state[m] = rho * ar_state[m] + scale * rng.standard_normal(
                    scenario.group_count
                )
            levels = np.asarray(scenario.group_levels[name][: scenario.group_count])
            base = levels[groups] + ar_state[m][groups]
            noise = scenario.sigma[name] * rng.standard_normal(n)
            values[:, m] = base + noise

        if scenario.coupling is not None and prev_values is not None:
            src, dst, gain, lag = scenario.coupling
            values[:, metric_idx[dst]] += gain * prev_values[:, metric_idx[src]]

        for ev in scenario.events:
            kind = ev["type"]
            if kind == "level_shift":
                if t >= ev["t"]:
                    mask = groups == ev.get("group", 0)
                    values[mask, metric_idx[ev["metric"]]] += ev["delta"]
            elif kind == "transient_peak":
                width = ev.get("width", 3)
                if ev["t"] <= t < ev["t"] + width:
                    mask = groups == ev.get("group", 0)
                    values[mask, metric_idx[ev["metric"]]] += ev["amplitude"]
            elif kind == "outlier_entity":
                from_t = ev.get("from_t", 0)
                to_t = ev.get("to_t")
                if t >= from_t and (to_t is None or t < to_t):
                    values[ev["entity"], metric_idx[ev["metric"]]] += ev["offset"]

        np.maximum(values, 0.0, out=values)
        # the coupling lag reads emitted (truncated) values: counts
        prev_values = values

        for e in range(n):
            yield _dumps({"t": t, "e": e, "v": [float(v) for v in values[e]]})

        # block-structured communication: dominant within-PE traffic
        for pe in range(scenario.pes):
            lo = pe * scenario.kps_per_pe
            hi = lo + scenario.kps_per_pe
            for _ in range(scenario.comm_within_pe):
                i = int(rng.integers(lo, hi))
                j = int(rng.integers(lo, hi))
                w = float(rng.poisson(scenario.comm_weight) + 1)
                yield _dumps({"t": t, "s": i, "d": j, "w": w})
        for _ in range(scenario.comm_cross_pe * scenario.pes):
            i = int(rng.integers(0, n))
            j = int(rng.integers(0, n))
            w = float(rng.poisson(scenario.comm_weight / 2) + 1)
            yield _dumps({"t": t, "s": i, "d": j, "w": w})
        for ev in scenario.events:
            if ev["type"] != "comm_hotspot":
                continue
            if ev.get("from_t", 0) <= t < ev.get("to_t", scenario.duration):
                for e in ev["entities"]:
                    yield _dumps({"t": t, "s": e, "d": e, "w": float(ev.get("weight", 50.0))})


def generate(
    scenario: Scenario,
    sink: Callable[[str], None],
    throttle: bool = True,
    clock=time.monotonic,
    sleep=time.sleep,
) -> int:
    """Emit the scenario to ``sink``, pacing slices at the configured
    interval unless ``throttle`` is off. Returns the line count."""
    count = 0
    deadline = None
    current_t = None
    for line in record_lines(scenario):
        record = json.loads(line)
        t = record.get("t")
        if throttle and scenario.interval > 0 and t is not None and t != current_t:
            current_t = t
            if deadline is None:
                deadline = clock()
            else:
                deadline += scenario.interval
                pause = deadline - clock()
                if pause > 0:
                    sleep(pause)
        sink(line)
        count += 1
    return count


def parse_line(line: str) -> dict | None:
    """Parse one wire line; None for blank/malformed input."""
    line = line.strip()
    if not line:
        return None
    try:
        record = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(record, dict):
        return None
    return record


def replay(
    path: str,
    speed: float,
    sink: Callable[[str], None],
    sleep=time.sleep,
) -> tuple[int, int]:
    """Re-emit a recorded stream, preserving relative slice timing scaled
    by ``speed`` (0 = as fast as the sink accepts). Returns
    ``(emitted, skipped)``."""
    if speed < 0:
        raise ValueError("speed multiplier must be >= 0")
    emitted = skipped = 0
    interval = None
    current_t = None
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            if not raw.strip():
                continue
            record = parse_line(raw)
            if record is None:
                skipped += 1
                continue
            if interval is None and "metrics" in record:
                interval = float(record.get("interval", 1.0))
            t = record.get("t")
            if t is not None and t != current_t:
                if current_t is not None and speed > 0 and interval:
                    sleep(interval / speed)
                current_t = t
            sink(raw.strip())
            emitted += 1
    return emitted, skipped
