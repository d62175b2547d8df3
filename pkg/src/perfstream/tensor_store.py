"""Windowed store for the streaming metric tensor and communication graphs.

Single source of truth for all analysis: joins per-entity metric records
into complete time slices, keeps a fixed-capacity ring of sealed slices,
extends the full-history per-metric summary means, and accumulates the
per-interval communication matrices with hierarchy-aware aggregation.

A slice becomes visible to readers only once sealed: either every entity
reported for that time index, or a straggler timeout expired and the
missing entities were forward-filled from their previous values. Slices
seal strictly in time order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["EntityId", "CommGraphFrame", "TensorStore", "IngestError"]


class IngestError(ValueError):
    """A record that violates the stream contract (bad entity, negative
    communication weight, malformed shape)."""


@dataclass(frozen=True)
class EntityId:
    index: int
    label: str
    hierarchy_path: tuple[int, ...]


@dataclass
class CommGraphFrame:
    """Weighted communication matrix for one sampling interval."""

    time_index: int
    dim: int
    aggregation_level: int
    weights: dict[tuple[int, int], float] = field(default_factory=dict)

    def add(self, src: int, dst: int, amount: float) -> None:
        self.weights[(src, dst)] = self.weights.get((src, dst), 0.0) + amount

    def dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for (i, j), w in self.weights.items():
            out[i, j] = w
        return out

    def entries(self) -> list[list[float]]:
        return [[int(i), int(j), float(w)] for (i, j), w in sorted(self.weights.items())]


class TensorStore:
    """Ring-buffered n x d x t tensor plus communication frames.

    Parameters
    ----------
    hierarchy : per-entity path of group indices, coarsest group first
        (e.g. ``[pe, kp]``). All paths must share one depth. Aggregation
        level L groups entities by ``path[:L]``; level 0 is the whole
        system, level ``depth`` the entities themselves.
    """

    def __init__(
        self,
        n: int,
        metric_names: list[str],
        hierarchy: list[list[int]] | None = None,
        window_capacity: int = 64,
        timeout_factor: float = 5.0,
        labels: list[str] | None = None,
    ):
        if n < 1:
            raise ValueError("need at least one entity")
        if not metric_names:
            raise ValueError("need at least one metric")
        if window_capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.n = n
        self.d = len(metric_names)
        self.metric_names = list(metric_names)
        self.window_capacity = window_capacity
        self.timeout_factor = timeout_factor

        if hierarchy is None:
            hierarchy = [[i] for i in range(n)]
        if len(hierarchy) != n:
            raise ValueError(f"hierarchy has {len(hierarchy)} paths for {n} entities")
        depth = len(hierarchy[0])
        if any(len(p) != depth for p in hierarchy):
            raise ValueError("all hierarchy paths must share one depth")
        self.depth = depth
        self.entities = [
            EntityId(
                index=i,
                label=labels[i] if labels else f"e{i}",
                hierarchy_path=tuple(hierarchy[i]),
            )
            for i in range(n)
        ]
        # per-level group index of each entity, and group count
        self._level_groups: list[tuple[np.ndarray, int]] = []
        for level in range(depth + 1):
            prefixes = sorted({tuple(p[:level]) for p in hierarchy})
            lookup = {pref: g for g, pref in enumerate(prefixes)}
            idx = np.array([lookup[tuple(p[:level])] for p in hierarchy])
            self._level_groups.append((idx, len(prefixes)))

        self._ring = np.zeros((window_capacity, n, self.d))
        self.t_total = 0  # sealed slices so far; next to seal is t_total
        self._open: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._open_touched: dict[int, float] = {}
        self._seal_intervals: list[float] = []
        self._last_seal_at: float | None = None
        self._last_now: float | None = None
        self._summary: list[np.ndarray] = []
        self._comm: dict[int, CommGraphFrame] = {}
        self._comm_pins: set[int] = set()
        self._subscribers: list = []
        self.duplicates = 0
        self.dropped = 0
        self.filled_entities = 0

    # ------------------------------------------------------------- ingest

    def subscribe(self, callback) -> None:
        """``callback(time_index)`` fires, in order, as slices seal."""
        self._subscribers.append(callback)

    def ingest_record(self, time_index: int, entity: int, values, now: float | None = None) -> bool:
        """Store one entity's metric vector; returns False when dropped."""
        if not 0 <= entity < self.n:
            raise IngestError(f"unknown entity index {entity}")
        vals = np.asarray(values, dtype=float)
        if vals.shape != (self.d,):
            raise IngestError(f"expected {self.d} metric values, got shape {vals.shape}")
        if time_index < self.t_total:
            self.dropped += 1
            return False
        if time_index not in self._open:
            self._open[time_index] = (np.zeros((self.n, self.d)), np.zeros(self.n, dtype=bool))
        grid, filled = self._open[time_index]
        if filled[entity]:
            self.duplicates += 1
        grid[entity] = vals
        filled[entity] = True
        if now is not None:
            self._last_now = now
            self._open_touched[time_index] = now
        self._seal_ready()
        return True

    def ingest_comm(self, time_index: int, src: int, dst: int, amount: float) -> bool:
        if not (0 <= src < self.n and 0 <= dst < self.n):
            raise IngestError(f"unknown entity in comm record ({src}, {dst})")
        amount = float(amount)
        if not np.isfinite(amount) or amount < 0.0:
            raise IngestError(f"communication amount must be >= 0, got {amount}")
        frame = self._comm.get(time_index)
        if frame is None:
            frame = CommGraphFrame(time_index, self.n, self.depth)
            self._comm[time_index] = frame
        frame.add(src, dst, amount)
        return True

    def _seal_ready(self) -> None:
        while self.t_total in self._open and bool(self._open[self.t_total][1].all()):
            self._seal(self.t_total)

    def check_timeouts(self, now: float) -> None:
        """Seal stalled slices by forward-fill once they idle too long.

        The timeout is ``timeout_factor`` times the median inter-seal
        interval; nothing happens until two timed seals establish a
        cadence. A time-index gap (later slices open, the next-to-seal
        never arrived) is bridged with a fully forward-filled slice.
        """
        self._last_now = now
        if len(self._seal_intervals) < 2 or not self._open:
            return
        timeout = self.timeout_factor * float(np.median(self._seal_intervals))
        while self._open:
            t = self.t_total
            if t in self._open:
                touched = self._open_touched.get(t, now)
                if now - touched < timeout:
                    return
                grid, filled = self._open[t]
                missing = np.flatnonzero(~filled)
            else:
                newest = max(self._open_touched.values(), default=now)
                if now - newest < timeout:
                    return
                grid = np.zeros((self.n, self.d))
                filled = np.zeros(self.n, dtype=bool)
                self._open[t] = (grid, filled)
                missing = np.arange(self.n)
            prev = self._ring[(t - 1) % self.window_capacity] if t > 0 else None
            for e in missing:
                grid[e] = prev[e] if prev is not None else 0.0
            self.filled_entities += int(missing.size)
            filled[:] = True
            self._seal(t)
            self._seal_ready()

    def _seal(self, t: int) -> None:
        grid, _ = self._open.pop(t)
        self._open_touched.pop(t, None)
        self._ring[t % self.window_capacity] = grid
        self.t_total = t + 1
        self._summary.append(grid.mean(axis=0))
        if self._last_now is not None:
            if self._last_seal_at is not None:
                self._seal_intervals.append(self._last_now - self._last_seal_at)
                del self._seal_intervals[:-32]
            self._last_seal_at = self._last_now
        self._evict_comm()
        for cb in self._subscribers:
            cb(t)

    # -------------------------------------------------------------- reads

    @property
    def window_width(self) -> int:
        return min(self.t_total, self.window_capacity)

    def window_times(self) -> np.ndarray:
        w = self.window_width
        return np.arange(self.t_total - w, self.t_total)

    def window_matrix(self, metric: int) -> np.ndarray:
        """Entity-major (n x w) matrix of one metric, oldest column first."""
        if not 0 <= metric < self.d:
            raise ValueError(f"unknown metric index {metric}")
        if self.t_total == 0:
            raise ValueError("no sealed slices yet")
        times = self.window_times()
        return self._ring[times % self.window_capacity, :, metric].T.copy()

    def slice_values(self, t: int) -> np.ndarray:
        """Sealed slice (n x d) at time t; must still be in the window."""
        if not self.t_total - self.window_width <= t < self.t_total:
            raise ValueError(f"slice {t} is not retained")
        return self._ring[t % self.window_capacity].copy()

    def summary_matrix(self) -> np.ndarray:
        """Full-history per-time mean across entities, (t_total x d)."""
        if not self._summary:
            return np.zeros((0, self.d))
        return np.asarray(self._summary)

    # ---------------------------------------------------------------- comm

    def comm_frame(self, t: int) -> CommGraphFrame:
        frame = self._comm.get(t)
        if frame is None:
            return CommGraphFrame(t, self.n, self.depth)
        return frame

    def pin_comm(self, t: int) -> None:
        """Protect a time index (base time or change point) from eviction."""
        self._comm_pins.add(t)

    def unpin_comm(self, t: int) -> None:
        self._comm_pins.discard(t)

    def _evict_comm(self) -> None:
        horizon = self.t_total - self.window_capacity
        stale = [t for t in self._comm if t < horizon and t not in self._comm_pins]
        for t in stale:
            del self._comm[t]

    def group_count(self, level: int) -> int:
        if not 0 <= level <= self.depth:
            raise ValueError(f"hierarchy level must be in [0, {self.depth}]")
        return self._level_groups[level][1]

    def group_index(self, level: int) -> np.ndarray:
        if not 0 <= level <= self.depth:
            raise ValueError(f"hierarchy level must be in [0, {self.depth}]")
        return self._level_groups[level][0]

    def aggregate_comm(self, frame: CommGraphFrame, level: int) -> CommGraphFrame:
        """Mean-aggregate a frame to a coarser hierarchy level.

        Output cell (G, H) is the mean over all entity cells (i, j) with
        i in G and j in H, zeros included.
        """
        if level >= frame.aggregation_level:
            raise ValueError(
                f"level {level} is not coarser than the frame's {frame.aggregation_level}"
            )
        if not 0 <= level <= self.depth:
            raise ValueError(f"hierarchy level must be in [0, {self.depth}]")
        groups, count = self._level_groups[level]
        sizes = np.bincount(groups, minlength=count).astype(float)
        sums = np.zeros((count, count))
        for (i, j), w in frame.weights.items():
            sums[groups[i], groups[j]] += w
        means = sums / np.outer(sizes, sizes)
        out = CommGraphFrame(frame.time_index, count, level)
        for i, j in zip(*np.nonzero(means)):
            out.weights[(int(i), int(j))] = float(means[i, j])
        return out
