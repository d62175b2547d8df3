"""Latency-budgeted mini-batch k-means over entity behavior vectors.

Each refresh draws small per-cluster batches (sampling entities from every
previous cluster keeps the coverage diverse), folds them into the centers
with per-center learning rates, and stops at budget expiry or once every
entity has been absorbed. All entities are then assigned to their nearest
center, and cluster IDs are remapped onto the previous labeling by
relative frequency so colors stay put between refreshes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ClusterModel", "refresh", "reassign_ids"]


@dataclass
class ClusterModel:
    k: int = 3
    batch_draw: int = 10  # entities drawn per previous cluster per batch
    latency_budget: float = 0.05  # seconds
    seed: int = 0
    z_normalize: bool = False
    centers: np.ndarray | None = None  # (k, w)
    center_counts: np.ndarray | None = None
    assignments: np.ndarray | None = None
    prev_assignments: np.ndarray | None = None
    processed_count: int = 0
    epoch: int = 0
    reseeded: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    def cluster_sizes(self) -> np.ndarray:
        if self.assignments is None:
            return np.zeros(self.k, dtype=int)
        return np.bincount(self.assignments, minlength=self.k)


def _seed_centers(window: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted (k-means++ style) center seeding."""
    n = window.shape[0]
    centers = np.empty((k, window.shape[1]))
    centers[0] = window[rng.integers(n)]
    d2 = ((window - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[i] = window[rng.integers(n)]
            continue
        centers[i] = window[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((window - centers[i]) ** 2).sum(axis=1))
    return centers


def _nearest(window: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x-c||^2 = ||x||^2 - 2 x.c + ||c||^2; the x term is constant per row.
    cross = window @ centers.T
    c2 = (centers * centers).sum(axis=1)
    return np.argmin(c2[np.newaxis, :] - 2.0 * cross, axis=1)


def refresh(
    model: ClusterModel,
    window: np.ndarray,
    budget: float | None = None,
) -> ClusterModel:
    """One progressive refresh against the current window (n x w).

    ``budget`` (seconds) overrides the model's ``latency_budget``; None
    uses it, and a non-positive budget performs no mini-batch step (the
    assignment pass still runs against the existing centers).
    """
    window = np.asarray(window, dtype=float)
    if window.ndim != 2:
        raise ValueError("window must be 2-D (entities x time)")
    n, w = window.shape
    if model.k > n:
        raise ValueError(f"k={model.k} exceeds entity count {n}")
    if budget is None:
        budget = model.latency_budget

    if model.z_normalize:
        mu = window.mean(axis=1, keepdims=True)
        sd = window.std(axis=1, keepdims=True)
        window = (window - mu) / np.maximum(sd, 1e-12)

    rng = np.random.default_rng((model.seed, model.epoch))
    out = ClusterModel(
        k=model.k,
        batch_draw=model.batch_draw,
        latency_budget=model.latency_budget,
        seed=model.seed,
        z_normalize=model.z_normalize,
        epoch=model.epoch + 1,
    )

    if model.centers is None or model.centers.shape != (model.k, w):
        out.centers = _seed_centers(window, model.k, rng)
        out.center_counts = np.ones(model.k)
        out.reseeded = True
    else:
        out.centers = model.centers.copy()
        out.center_counts = model.center_counts.copy()
    # The previous partition stays meaningful across a re-seed (behavior
    # vectors are window-relative); it drives both the diverse sampling
    # order and the label continuity below.
    if model.assignments is not None and model.assignments.shape == (n,):
        prev_labels = model.assignments
    else:
        prev_labels = _nearest(window, out.centers)

    # Per-previous-cluster queues, each shuffled once; a refresh never
    # absorbs the same entity twice.
    queues = []
    for c in range(model.k):
        members = np.flatnonzero(prev_labels == c)
        rng.shuffle(members)
        queues.append(list(members))

    start = time.perf_counter()
    processed = 0
    while any(queues) and (time.perf_counter() - start) < budget:
        batch_idx = []
        for q in queues:
            take = min(model.batch_draw, len(q))
            if take:
                batch_idx.extend(q[-take:])
                del q[-take:]
        if not batch_idx:
            break
        batch = window[batch_idx]
        labels = _nearest(batch, out.centers)
        for row, c in zip(batch, labels):
            out.center_counts[c] += 1.0
            eta = 1.0 / out.center_counts[c]
            out.centers[c] += eta * (row - out.centers[c])
        processed += len(batch_idx)
    out.processed_count = processed

    new_labels = _nearest(window, out.centers)
    # Re-seed any cluster that ended up empty with the entity farthest from
    # its current center, then re-assign.
    for _ in range(model.k):
        sizes = np.bincount(new_labels, minlength=model.k)
        empties = np.flatnonzero(sizes == 0)
        if empties.size == 0:
            break
        dists = ((window - out.centers[new_labels]) ** 2).sum(axis=1)
        for c in empties:
            far = int(np.argmax(dists))
            out.centers[c] = window[far]
            dists[far] = -1.0
        new_labels = _nearest(window, out.centers)

    relabeled, mapping = reassign_ids(prev_labels, new_labels, model.k, rng=rng)
    inverse = np.empty(model.k, dtype=int)
    inverse[mapping] = np.arange(model.k)
    out.centers = out.centers[inverse]
    out.center_counts = out.center_counts[inverse]
    out.assignments = relabeled
    out.prev_assignments = (
        model.assignments.copy() if model.assignments is not None else None
    )
    return out


def reassign_ids(
    prev_assignments: np.ndarray,
    new_assignments: np.ndarray,
    k: int,
    budget: float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Relabel ``new_assignments`` to line up with ``prev_assignments``.

    For each new label, the relative frequency of previous labels among
    its members is estimated (exhaustively when time allows, otherwise
    from a random sample drawn within ``budget`` seconds). Pairs are then
    matched greedily by descending frequency, each previous label used at
    most once; unmatched new labels receive the leftover IDs in ascending
    order. Returns ``(relabeled, mapping)`` with ``mapping[new] = final``.
    """
    prev = np.asarray(prev_assignments)
    new = np.asarray(new_assignments)
    if prev.shape != new.shape:
        raise ValueError("assignment vectors must have the same length")
    if rng is None:
        rng = np.random.default_rng(0)

    counts = np.zeros((k, k))
    if budget is None:
        np.add.at(counts, (new, prev), 1.0)
    else:
        start = time.perf_counter()
        order = rng.permutation(prev.size)
        chunk = 1024
        done = 0
        while done < prev.size:
            idx = order[done : done + chunk]
            np.add.at(counts, (new[idx], prev[idx]), 1.0)
            done += idx.size
            if (time.perf_counter() - start) >= budget:
                break

    totals = counts.sum(axis=1, keepdims=True)
    freq = counts / np.maximum(totals, 1.0)
    order = sorted(
        ((freq[i, j], i, j) for i in range(k) for j in range(k) if counts[i, j] > 0),
        key=lambda item: (-item[0], item[1], item[2]),
    )
    mapping = np.full(k, -1, dtype=int)
    used_prev = np.zeros(k, dtype=bool)
    for _, i, j in order:
        if mapping[i] < 0 and not used_prev[j]:
            mapping[i] = j
            used_prev[j] = True
    leftovers = iter(np.flatnonzero(~used_prev))
    for i in range(k):
        if mapping[i] < 0:
            mapping[i] = next(leftovers)
    return mapping[new], mapping
