"""Online change detection on a sign-coherent representative series.

A metric's n concurrent series are reduced to one scalar per time point by
projecting each new slice onto the first incremental-PCA component in
entity space. The component's sign is kept coherent across updates (an
arbitrary eigenvector sign flip would otherwise fabricate or mask a jump
in the representative value). The scalar stream then feeds a
single-parameter online detector: an adaptively-forgetting running mean
whose standardized deviation from a frozen baseline is compared against
the normal quantile implied by the significance level alpha.

Detector state is O(1): a handful of scalars, no history buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np
from scipy.stats import norm

from .ipca import PcaModel, ipca_update

__all__ = ["DetectorState", "RepresentativeSeriesState", "MetricChangeDetector", "detect_scalar", "push_slice"]

_SIGMA_FLOOR = 1e-12


@dataclass
class DetectorState:
    """Adaptive-forgetting mean detector with a single tuning knob, alpha.

    The forgetting factor takes one normalized gradient step per point on
    the squared one-step prediction error, so the estimator tightens on
    stable stretches and loosens after drift. A detection resets the
    baseline to restart from the current value.
    """

    alpha: float = 0.01
    burn_in: int = 10
    grad_step: float = 0.01
    lam_min: float = 0.6
    change_points: list[int] = field(default_factory=list)

    # estimator internals
    lam: float = 0.95
    w: float = 0.0
    u: float = 0.0
    m_un: float = 0.0
    mbar: float = 0.0
    dm: float = 0.0
    dw: float = 0.0
    # frozen baseline (set when burn-in completes)
    mu0: float = 0.0
    sigma0: float = 0.0
    baseline_ready: bool = False
    # burn-in accumulators (Welford)
    _count: int = 0
    _mean: float = 0.0
    _m2: float = 0.0
    _z_crit: float = field(init=False, default=0.0)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        self.set_alpha(self.alpha)

    def set_alpha(self, alpha: float) -> None:
        """Change sensitivity; affects future decisions only."""
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {alpha}")
        self.alpha = alpha
        # Two-sided threshold; alpha=1 flags everything, alpha=0 nothing.
        if alpha <= 0.0:
            self._z_crit = np.inf
        else:
            self._z_crit = float(norm.ppf(1.0 - alpha / 2.0))

    def _restart(self, x: float) -> None:
        self.baseline_ready = False
        self._count = 1
        self._mean = x
        self._m2 = 0.0
        self.lam = 0.95
        self.w = 1.0
        self.u = 1.0
        self.m_un = x
        self.mbar = x
        self.dm = 0.0
        self.dw = 0.0

    def push(self, x: float, t: int | None = None) -> bool:
        """Absorb one scalar; True when a change is flagged at this point."""
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("detector input must be finite")
        if self._count == 0:
            self._restart(x)
            return False

        # One gradient step on the one-step-ahead squared error, normalized
        # by the baseline variance so the step size is scale-free.
        err = x - self.mbar
        if self.baseline_ready:
            denom = max(self.sigma0 * self.sigma0, _SIGMA_FLOOR)
            lam = self.lam + self.grad_step * err * self.dm_bar / denom
            self.lam = min(max(lam, self.lam_min), 1.0)

        # Derivative recursions use the pre-update accumulators.
        new_dw = self.w + self.lam * self.dw
        new_dm = self.m_un + self.lam * self.dm
        self.w = self.lam * self.w + 1.0
        self.u = self.lam * self.lam * self.u + 1.0
        self.m_un = self.lam * self.m_un + x
        self.mbar = self.m_un / self.w
        self.dw = new_dw
        self.dm = new_dm

        if not self.baseline_ready:
            # A wild jump while re-baselining means the regime moved again;
            # silently restart rather than blend two regimes into one
            # baseline. Never recorded as a change point.
            if self._count >= 5:
                sd = math.sqrt(max(self._m2 / (self._count - 1), 0.0))
                sd = max(sd, _SIGMA_FLOOR * max(1.0, abs(self._mean)))
                if abs(x - self._mean) > 8.0 * sd:
                    self._restart(x)
                    return False
            self._count += 1
            delta = x - self._mean
            self._mean += delta / self._count
            self._m2 += delta * (x - self._mean)
            if self._count >= self.burn_in:
                self.mu0 = self._mean
                var = self._m2 / max(self._count - 1, 1)
                self.sigma0 = max(math.sqrt(max(var, 0.0)), _SIGMA_FLOOR)
                self.baseline_ready = True
            return False

        spread = self.sigma0 * math.sqrt(max(self.u, 1.0)) / self.w
        z = (self.mbar - self.mu0) / max(spread, _SIGMA_FLOOR)
        if abs(z) > self._z_crit:
            if t is not None:
                self.change_points.append(int(t))
            self._restart(x)
            return True
        return False

    @property
    def dm_bar(self) -> float:
        """Derivative of the normalized mean w.r.t. the forgetting factor."""
        if self.w <= 0.0:
            return 0.0
        return (self.dm * self.w - self.m_un * self.dw) / (self.w * self.w)


def detect_scalar(state: DetectorState, x: float, t: int | None = None) -> bool:
    """Functional form of ``DetectorState.push``."""
    return state.push(x, t)


@dataclass
class RepresentativeSeriesState:
    """First-PC reduction of n concurrent series to one scalar per slice."""

    n: int
    forgetting: float = 1.0
    sign_adjust: bool = True
    pca: PcaModel = None
    last_pc: np.ndarray | None = None
    series: list[float] = field(default_factory=list)
    skipped: int = 0

    def __post_init__(self):
        if self.pca is None:
            self.pca = PcaModel.empty(self.n, max_components=1, forgetting=self.forgetting)

    def push(self, slice_values: np.ndarray) -> float | None:
        """Absorb one sealed slice; returns the representative value, or
        None when the slice was skipped (non-finite input)."""
        x = np.asarray(slice_values, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"slice has shape {x.shape}, expected ({self.n},)")
        try:
            self.pca = ipca_update(self.pca, x)
        except ValueError:
            # non-finite slice: skip it, model untouched
            self.skipped += 1
            return None
        if self.pca.q == 0:
            # No spread yet: representative value is the deviation from the
            # running mean, which is zero.
            rep = 0.0
        else:
            pc = self._raw_pc1()
            if self.sign_adjust:
                if self.last_pc is None:
                    # deterministic first orientation: largest-magnitude
                    # weight positive, so peaks keep the data's direction
                    if pc[int(np.argmax(np.abs(pc)))] < 0.0:
                        pc = -pc
                # scalar form of sign_align for the single-component case
                elif float(self.last_pc @ pc) < 0.0:
                    pc = -pc
            self.last_pc = pc
            rep = float((x - self.pca.mean) @ pc)
        self.series.append(rep)
        return rep

    def _raw_pc1(self) -> np.ndarray:
        """First component exactly as the eigenbasis update produced it.

        Either orientation of an eigenvector is a valid factorization
        output; flip fixtures override this to exercise the adversarial
        choice deterministically.
        """
        return self.pca.components[0]


@dataclass
class MetricChangeDetector:
    """Per-metric pipeline: representative reduction plus online detection."""

    n: int
    alpha: float = 0.01
    burn_in: int = 10
    forgetting: float = 1.0
    sign_adjust: bool = True
    rep: RepresentativeSeriesState = None
    detector: DetectorState = None

    def __post_init__(self):
        if self.rep is None:
            self.rep = RepresentativeSeriesState(
                self.n, forgetting=self.forgetting, sign_adjust=self.sign_adjust
            )
        if self.detector is None:
            self.detector = DetectorState(alpha=self.alpha, burn_in=self.burn_in)

    @property
    def change_points(self) -> list[int]:
        return self.detector.change_points

    def push_slice(self, slice_values: np.ndarray, time_index: int) -> tuple[float | None, int | None]:
        """Returns (representative value, change time or None)."""
        rep = self.rep.push(slice_values)
        if rep is None:
            return None, None
        flagged = self.detector.push(rep, t=time_index)
        return rep, (time_index if flagged else None)


def push_slice(
    state: MetricChangeDetector, slice_values: np.ndarray, time_index: int
) -> tuple[float | None, int | None]:
    """Functional form of ``MetricChangeDetector.push_slice``."""
    return state.push_slice(slice_values, time_index)
