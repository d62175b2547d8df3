"""Incremental PCA with sign coherence and Procrustes layout alignment.

This is the shared numerical kernel behind the representative-series
reduction, the progressive 2D projection, and the causality panel. The
eigenbasis update follows the sequential Karhunen-Loeve scheme: each batch
is folded into the running factorization through an SVD of a small
augmented matrix built from the scaled current basis, the centered batch,
and a mean-correction row. With no truncation (all non-zero singular
values retained) the update is exact, i.e. feeding a dataset through in
any batch split reproduces the batch SVD of the centered data.

Models are values: update functions return a new ``PcaModel`` and never
mutate their input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PcaModel",
    "Layout2D",
    "ProcrustesResult",
    "ipca_update",
    "sign_align",
    "project",
    "procrustes_align",
    "layout_disparity",
]

# Relative cutoff below which singular values are treated as numerically
# zero and their directions dropped instead of retained as noise.
_SV_RTOL = 1e-12


@dataclass
class PcaModel:
    """Running mean and eigenbasis of a data stream.

    ``components`` rows are mutually orthonormal and ordered by
    non-increasing ``singular_values``. ``weight`` is the effective number
    of absorbed observations (equal to ``n_seen`` when ``forgetting`` is
    1.0, smaller otherwise).
    """

    dim: int
    max_components: int
    mean: np.ndarray
    components: np.ndarray  # (q, dim)
    singular_values: np.ndarray  # (q,)
    n_seen: int = 0
    weight: float = 0.0
    forgetting: float = 1.0

    @classmethod
    def empty(cls, dim: int, max_components: int, forgetting: float = 1.0) -> "PcaModel":
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if max_components < 1:
            raise ValueError(f"max_components must be >= 1, got {max_components}")
        if not 0.0 < forgetting <= 1.0:
            raise ValueError(f"forgetting must be in (0, 1], got {forgetting}")
        return cls(
            dim=dim,
            max_components=max_components,
            mean=np.zeros(dim),
            components=np.zeros((0, dim)),
            singular_values=np.zeros(0),
            forgetting=forgetting,
        )

    @property
    def q(self) -> int:
        return self.components.shape[0]


def ipca_update(model: PcaModel, batch: np.ndarray) -> PcaModel:
    """Absorb a batch of observations, returning the updated model.

    Parameters
    ----------
    batch : array of shape (m, dim) or (dim,)
        Rows are observations. Non-finite values reject the whole batch
        (``ValueError``) and leave the model untouched.
    """
    x = np.asarray(batch, dtype=float)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ValueError(f"batch has shape {x.shape}, expected (m, {model.dim})")
    m = x.shape[0]
    if m < 1:
        raise ValueError("batch must contain at least one observation")
    if not np.isfinite(x).all():
        raise ValueError("batch contains non-finite values")

    f = model.forgetting
    q = model.q
    prev_weight = f * model.weight
    new_weight = prev_weight + m
    batch_mean = x[0] if m == 1 else x.mean(axis=0)
    new_mean = (prev_weight * model.mean + m * batch_mean) / new_weight

    # Augmented factorization: discounted previous basis, centered batch,
    # and the rank-one correction for the shift of the running mean.
    aug = np.empty((q + m + 1, model.dim))
    if q:
        np.multiply(
            (f * model.singular_values)[:, np.newaxis], model.components, out=aug[:q]
        )
    np.subtract(x, batch_mean, out=aug[q : q + m])
    corr = np.sqrt(prev_weight * m / new_weight)
    np.multiply(batch_mean - model.mean, corr, out=aug[q + m])

    _, svals, vt = np.linalg.svd(aug, full_matrices=False)
    cutoff = _SV_RTOL * max(svals[0] if svals.size else 0.0, 1.0)
    keep = min(int((svals > cutoff).sum()), model.max_components, model.dim)
    if keep == 0:
        # Zero-spread batch on a fresh model: mean-only update, no basis.
        return PcaModel(
            dim=model.dim,
            max_components=model.max_components,
            mean=new_mean,
            components=model.components,
            singular_values=model.singular_values,
            n_seen=model.n_seen + m,
            weight=new_weight,
            forgetting=f,
        )
    return PcaModel(
        dim=model.dim,
        max_components=model.max_components,
        mean=new_mean,
        components=vt[:keep],
        singular_values=svals[:keep],
        n_seen=model.n_seen + m,
        weight=new_weight,
        forgetting=f,
    )


def sign_align(
    prev_components: np.ndarray, new_components: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Give ``new_components`` rows signs coherent with ``prev_components``.

    A row is negated when its cosine similarity with the matching previous
    row is strictly negative; zero similarity (including zero-norm rows)
    leaves the row unchanged. Returns ``(aligned, flipped)`` where
    ``flipped`` is a boolean vector marking negated rows.
    """
    prev = np.atleast_2d(np.asarray(prev_components, dtype=float))
    new = np.atleast_2d(np.asarray(new_components, dtype=float))
    if prev.shape != new.shape:
        raise ValueError(f"shape mismatch: {prev.shape} vs {new.shape}")
    dots = np.einsum("ij,ij->i", prev, new)
    flipped = dots < 0.0
    aligned = new.copy()
    aligned[flipped] *= -1.0
    return aligned, flipped


def project(model: PcaModel, rows: np.ndarray) -> np.ndarray:
    """Score rows against the model: ``(rows - mean) @ components.T``."""
    r = np.atleast_2d(np.asarray(rows, dtype=float))
    if r.shape[1] != model.dim:
        raise ValueError(f"rows have dim {r.shape[1]}, expected {model.dim}")
    if model.q == 0:
        raise ValueError("model has no components yet")
    return (r - model.mean) @ model.components.T


@dataclass
class Layout2D:
    """A 2D embedding of the entities, one row per entity."""

    positions: np.ndarray  # (n, 2)
    epoch: int = 0


@dataclass
class ProcrustesResult:
    layout: Layout2D
    disparity: float
    degenerate: bool = False


def layout_disparity(a: Layout2D, b: Layout2D) -> float:
    """Sum of squared row distances between two layouts."""
    return float(np.sum((a.positions - b.positions) ** 2))


def procrustes_align(reference: Layout2D, candidate: Layout2D) -> ProcrustesResult:
    """Best similarity-transform overlap of ``candidate`` onto ``reference``.

    Minimizes the sum of squared row distances over translation, uniform
    scaling, rotation, and reflection. A degenerate candidate (all points
    coincident) is translated to the reference centroid and flagged.
    """
    ref = np.asarray(reference.positions, dtype=float)
    cand = np.asarray(candidate.positions, dtype=float)
    if ref.shape != cand.shape:
        raise ValueError(f"layout shape mismatch: {ref.shape} vs {cand.shape}")
    if ref.shape[0] < 2:
        raise ValueError("need at least two points to align")

    mu_ref = ref.mean(axis=0)
    mu_cand = cand.mean(axis=0)
    rc = ref - mu_ref
    cc = cand - mu_cand
    cand_ss = float(np.sum(cc * cc))
    scale_floor = max(float(np.sum(rc * rc)), 1.0)
    if cand_ss <= 1e-24 * scale_floor:
        positions = cand - mu_cand + mu_ref
        disparity = float(np.sum(rc * rc))
        return ProcrustesResult(
            Layout2D(positions, epoch=candidate.epoch), disparity, degenerate=True
        )

    u, svals, vt = np.linalg.svd(cc.T @ rc)
    rotation = u @ vt  # reflection allowed: no determinant correction
    scale = float(svals.sum()) / cand_ss
    aligned = scale * cc @ rotation + mu_ref
    disparity = float(np.sum((aligned - ref) ** 2))
    return ProcrustesResult(Layout2D(aligned, epoch=candidate.epoch), disparity)
