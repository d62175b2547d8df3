"""Latency-budgeted 2D projection with mental-map-preserving alignment.

The entity behavior vectors (rows of the window matrix) feed an
incremental PCA capped at two components. Each refresh absorbs entity
batches drawn per cluster (same diverse sampling order as the clustering
refresh) until the budget expires, then projects every entity onto the
first two components; that full projection pass is deliberately outside
the budget. The raw projection is finally Procrustes-aligned to the
previous epoch's layout so arbitrary rotations and reflections of the
eigenbasis never jolt the picture.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .ipca import Layout2D, PcaModel, ipca_update, procrustes_align, project

__all__ = ["DrState", "refresh_layout"]


@dataclass
class DrState:
    batch_draw: int = 10
    latency_budget: float = 0.001  # seconds
    seed: int = 0
    pca: PcaModel | None = None
    layout: Layout2D | None = None
    prev_layout: Layout2D | None = None
    processed_count: int = 0
    epoch: int = 0
    reset: bool = False  # width change broke continuity this epoch
    last_disparity: float = 0.0

    def _raw_components(self) -> np.ndarray:
        """Components exactly as the eigenbasis update produced them; flip
        fixtures override this to exercise the adversarial orientation."""
        return self.pca.components


def refresh_layout(
    state: DrState,
    window: np.ndarray,
    cluster_assignments: np.ndarray | None,
    budget: float | None = None,
) -> Layout2D:
    """Run one progressive layout refresh in place; returns the new layout."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2:
        raise ValueError("window must be 2-D (entities x time)")
    n, w = window.shape
    if budget is None:
        budget = state.latency_budget

    state.reset = False
    if state.pca is None or state.pca.dim != w:
        state.pca = PcaModel.empty(dim=w, max_components=2)
        state.reset = True

    rng = np.random.default_rng((state.seed, state.epoch))
    if cluster_assignments is None:
        labels = np.zeros(n, dtype=int)
    else:
        labels = np.asarray(cluster_assignments)

    queues = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        rng.shuffle(members)
        queues.append(list(members))

    start = time.perf_counter()
    processed = 0
    while any(queues) and (time.perf_counter() - start) < budget:
        batch_idx = []
        for q in queues:
            take = min(state.batch_draw, len(q))
            if take:
                batch_idx.extend(q[-take:])
                del q[-take:]
        if not batch_idx:
            break
        state.pca = ipca_update(state.pca, window[batch_idx])
        processed += len(batch_idx)
    state.processed_count = processed

    if state.pca.q == 0:
        positions = np.zeros((n, 2))
    else:
        comps = state._raw_components()
        scores = (window - state.pca.mean) @ comps.T
        positions = np.zeros((n, 2))
        positions[:, : scores.shape[1]] = scores[:, :2]

    raw = Layout2D(positions, epoch=state.epoch + 1)
    reference = state.layout
    if reference is None or state.reset:
        aligned = raw
        state.last_disparity = 0.0
    else:
        result = procrustes_align(reference, raw)
        aligned = result.layout
        state.last_disparity = result.disparity

    state.prev_layout = state.layout
    state.layout = aligned
    state.epoch += 1
    return aligned
