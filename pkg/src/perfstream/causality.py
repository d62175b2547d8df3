"""Progressive vector-autoregression causal analysis over metric series.

One sign-coherent representative series per metric forms the panel. The
VAR fit is made budget-friendly by fitting on s sampled lag tuples and
growing (or shrinking) s between refits from the observed cost: after a
fit that took t_c with t_r budget left, the next attempt uses
s * sqrt(t_r / t_c), exploiting the quadratic cost growth; an overrunning
warm start is shrunk by s * sqrt(t_l / t_c). Fitting stops when the
budget is spent or the full history fits.

On top of a fitted model: a Wald/F Granger test of the cause variable's
lag coefficients in the effect equation, orthogonalized impulse responses
through the moving-average recursion, and the matching forecast-error
variance decomposition. Series are z-scored with running statistics
before fitting, which makes the Granger statistic invariant to affine
rescaling of any metric; responses are therefore in standardized units.
Orthogonalization (Cholesky) follows metric declaration order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "RepresentativePanel",
    "VarModel",
    "CausalityReport",
    "ReportRow",
    "next_sample_count",
    "overrun_sample_count",
    "progressive_var_fit",
    "granger_test",
    "impulse_response",
    "variance_decomposition",
    "build_report",
]

MIN_BASE_SAMPLE = 10


class RepresentativePanel:
    """d aligned scalar series with running standardization statistics."""

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("panel needs at least one series")
        self.d = d
        self._rows: list[np.ndarray] = []
        self._count = 0
        self._mean = np.zeros(d)
        self._m2 = np.zeros(d)

    def __len__(self) -> int:
        return self._count

    def append(self, values) -> None:
        row = np.asarray(values, dtype=float)
        if row.shape != (self.d,):
            raise ValueError(f"expected {self.d} values, got shape {row.shape}")
        if not np.all(np.isfinite(row)):
            raise ValueError("panel values must be finite")
        self._rows.append(row)
        self._count += 1
        delta = row - self._mean
        self._mean += delta / self._count
        self._m2 += delta * (row - self._mean)

    @property
    def mean(self) -> np.ndarray:
        return self._mean.copy()

    @property
    def std(self) -> np.ndarray:
        if self._count < 2:
            return np.ones(self.d)
        return np.sqrt(np.maximum(self._m2 / (self._count - 1), 0.0))

    def standardized(self) -> np.ndarray:
        x = np.asarray(self._rows)
        sd = np.maximum(self.std, 1e-12)
        return (x - self._mean) / sd


@dataclass
class VarModel:
    p: int
    coef: np.ndarray  # ((1 + d*p), d): intercept row then lag blocks
    resid_cov: np.ndarray  # (d, d)
    s: int  # time points used in the fit
    fit_time: float
    xtx_inv: np.ndarray
    nobs: int
    ridge: bool = False
    suggested_s: int | None = None
    refits: int = 0

    @property
    def d(self) -> int:
        return self.coef.shape[1]

    @property
    def c(self) -> np.ndarray:
        return self.coef[0]

    def lag_matrix(self, lag: int) -> np.ndarray:
        """A_lag with A[i, j] = effect of series j at t-lag on series i."""
        if not 1 <= lag <= self.p:
            raise ValueError(f"lag must be in [1, {self.p}]")
        d = self.d
        return self.coef[1 + (lag - 1) * d : 1 + lag * d].T

    @property
    def sigma2(self) -> np.ndarray:
        return np.diag(self.resid_cov)


def next_sample_count(s: float, t_r: float, t_c: float) -> float:
    """Sample-count growth rule between refits: s * sqrt(t_r / t_c)."""
    return s * math.sqrt(t_r / t_c)


def overrun_sample_count(s: float, t_l: float, t_c: float) -> float:
    """Warm-start shrink rule after an overrun: s * sqrt(t_l / t_c)."""
    return s * math.sqrt(t_l / t_c)


def _fit_once(
    x: np.ndarray, p: int, sample: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, bool]:
    """Least-squares VAR(p) on all rows or on sampled target indices.

    Sampled fitting keeps lag adjacency intact: each sampled target index i
    contributes the tuple (x[i-p..i-1], x[i]).
    """
    t, d = x.shape
    targets = np.arange(p, t) if sample is None else sample
    rows = targets.size
    k = 1 + d * p
    z = np.empty((rows, k))
    z[:, 0] = 1.0
    for lag in range(1, p + 1):
        z[:, 1 + (lag - 1) * d : 1 + lag * d] = x[targets - lag]
    y = x[targets]

    xtx = z.T @ z
    xty = z.T @ y
    ridge = False
    try:
        coef = np.linalg.solve(xtx, xty)
        if not np.all(np.isfinite(coef)):
            raise np.linalg.LinAlgError
        # reject solutions from numerically singular systems
        if np.linalg.cond(xtx) > 1e12:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        lam = 1e-8 * max(np.trace(xtx) / k, 1.0)
        coef = np.linalg.solve(xtx + lam * np.eye(k), xty)
        ridge = True

    resid = y - z @ coef
    dof = max(rows - k, 1)
    resid_cov = resid.T @ resid / dof
    resid_cov = 0.5 * (resid_cov + resid_cov.T)
    xtx_inv = np.linalg.pinv(xtx)
    return coef, resid_cov, xtx_inv, rows, ridge


def progressive_var_fit(
    panel: RepresentativePanel,
    latency_budget: float | None = None,
    prev_s: int | None = None,
    p: int = 1,
    rng: np.random.Generator | None = None,
    clock=time.perf_counter,
) -> VarModel | None:
    """Budgeted VAR fit over the standardized panel history.

    Returns None (no model) when the history is shorter than the minimum
    sample. With no budget the full ordered history is fitted directly.
    """
    if not 1 <= p <= 4:
        raise ValueError(f"lag order must be in [1, 4], got {p}")
    d = panel.d
    t = len(panel)
    min_s = max(MIN_BASE_SAMPLE, d * p + 2)
    if t < min_s + p:
        return None
    x = panel.standardized()
    if rng is None:
        rng = np.random.default_rng(0)

    if latency_budget is None or latency_budget <= 0 or math.isinf(latency_budget):
        start = clock()
        coef, resid_cov, xtx_inv, rows, ridge = _fit_once(x, p, None)
        elapsed = clock() - start
        return VarModel(
            p=p, coef=coef, resid_cov=resid_cov, s=rows, fit_time=elapsed,
            xtx_inv=xtx_inv, nobs=rows, ridge=ridge, suggested_s=rows, refits=1,
        )

    max_s = t - p
    s = int(prev_s) if prev_s else MIN_BASE_SAMPLE
    s = max(min_s, min(s, max_s))
    budget_left = float(latency_budget)
    model = None
    refits = 0
    while True:
        sample = None if s >= max_s else rng.choice(np.arange(p, t), size=s, replace=False)
        start = clock()
        coef, resid_cov, xtx_inv, rows, ridge = _fit_once(x, p, sample)
        t_c = max(clock() - start, 1e-9)
        refits += 1
        budget_left -= t_c
        model = VarModel(
            p=p, coef=coef, resid_cov=resid_cov, s=rows, fit_time=t_c,
            xtx_inv=xtx_inv, nobs=rows, ridge=ridge, refits=refits,
        )
        if s >= max_s or budget_left <= 0:
            break
        s = max(min_s, min(int(round(next_sample_count(s, budget_left, t_c))), max_s))

    if model.fit_time > latency_budget:
        model.suggested_s = max(
            min_s, int(round(overrun_sample_count(model.s, latency_budget, model.fit_time)))
        )
    else:
        model.suggested_s = model.s
    return model


def granger_test(model: VarModel, cause: int, effect: int) -> float:
    """p-value of the joint null that every lag coefficient of ``cause``
    in the ``effect`` equation is zero (Wald form, F reference)."""
    if model is None:
        raise ValueError("model is not fitted")
    d = model.d
    if cause == effect:
        raise ValueError("cause and effect must differ")
    if not (0 <= cause < d and 0 <= effect < d):
        raise ValueError("metric index out of range")
    idx = [1 + lag * d + cause for lag in range(model.p)]
    beta = model.coef[idx, effect]
    cov = model.sigma2[effect] * model.xtx_inv[np.ix_(idx, idx)]
    try:
        wald = float(beta @ np.linalg.solve(cov, beta))
    except np.linalg.LinAlgError:
        return 1.0
    wald = max(wald, 0.0)
    dof_resid = max(model.nobs - model.coef.shape[0], 1)
    return float(stats.f.sf(wald / model.p, model.p, dof_resid))


def _chol_factor(resid_cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(resid_cov)
    except np.linalg.LinAlgError:
        d = resid_cov.shape[0]
        jitter = 1e-10 * max(np.trace(resid_cov) / d, 1.0)
        for _ in range(12):
            try:
                return np.linalg.cholesky(resid_cov + jitter * np.eye(d))
            except np.linalg.LinAlgError:
                jitter *= 10.0
        raise


def _ma_coefficients(model: VarModel, horizon: int) -> np.ndarray:
    """Phi_0..Phi_h of the moving-average representation."""
    d = model.d
    a = [model.lag_matrix(lag) for lag in range(1, model.p + 1)]
    phi = np.zeros((horizon + 1, d, d))
    phi[0] = np.eye(d)
    for j in range(1, horizon + 1):
        acc = np.zeros((d, d))
        for i in range(1, min(j, model.p) + 1):
            acc += a[i - 1] @ phi[j - i]
        phi[j] = acc
    return phi


def impulse_response(model: VarModel, shock: int, response: int, horizon: int) -> np.ndarray:
    """Orthogonalized impulse response over horizons 0..h."""
    if model is None:
        raise ValueError("model is not fitted")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if not (0 <= shock < model.d and 0 <= response < model.d):
        raise ValueError("metric index out of range")
    chol = _chol_factor(model.resid_cov)
    phi = _ma_coefficients(model, horizon)
    return np.array([(phi[j] @ chol)[response, shock] for j in range(horizon + 1)])


def variance_decomposition(model: VarModel, target: int, horizon: int) -> np.ndarray:
    """Share of each metric's orthogonalized shocks in the target's
    h-step forecast-error variance. Shares sum to one."""
    if model is None:
        raise ValueError("model is not fitted")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not 0 <= target < model.d:
        raise ValueError("metric index out of range")
    chol = _chol_factor(model.resid_cov)
    phi = _ma_coefficients(model, horizon - 1)
    theta = phi @ chol  # (h, d, d)
    num = (theta[:, target, :] ** 2).sum(axis=0)
    total = num.sum()
    if total <= 0.0:
        out = np.zeros(model.d)
        out[target] = 1.0
        return out
    return num / total


@dataclass
class ReportRow:
    metric: int
    granger_p: float
    significant: bool
    ir: float
    vd: float


@dataclass
class CausalityReport:
    target: int
    direction: str  # "from" or "to"
    rows: list[ReportRow] = field(default_factory=list)
    p_threshold: float = 0.05
    horizon: int = 10
    ridge: bool = False

    def row_for(self, metric: int) -> ReportRow | None:
        for row in self.rows:
            if row.metric == metric:
                return row
        return None


def build_report(
    model: VarModel,
    target: int,
    direction: str = "from",
    p_threshold: float = 0.05,
    ir_summary_horizon: int = 10,
) -> CausalityReport:
    """Per-metric causality table for the target metric.

    from-causality asks which metrics drive the target; to-causality asks
    which metrics the target drives. ``ir`` is the peak absolute
    orthogonalized response over horizons 1..H, ``vd`` the H-step
    forecast-error variance share.
    """
    if model is None:
        raise ValueError("model is not fitted")
    if direction not in ("from", "to"):
        raise ValueError(f"direction must be 'from' or 'to', got {direction!r}")
    report = CausalityReport(
        target=target,
        direction=direction,
        p_threshold=p_threshold,
        horizon=ir_summary_horizon,
        ridge=model.ridge,
    )
    h = ir_summary_horizon
    for metric in range(model.d):
        if metric == target:
            continue
        if direction == "from":
            pval = granger_test(model, cause=metric, effect=target)
            ir = impulse_response(model, shock=metric, response=target, horizon=h)
            vd = variance_decomposition(model, target, h)[metric]
        else:
            pval = granger_test(model, cause=target, effect=metric)
            ir = impulse_response(model, shock=target, response=metric, horizon=h)
            vd = variance_decomposition(model, metric, h)[target]
        report.rows.append(
            ReportRow(
                metric=metric,
                granger_p=pval,
                significant=bool(pval < p_threshold),
                ir=float(np.max(np.abs(ir[1:]))) if h >= 1 else 0.0,
                vd=float(vd),
            )
        )
    return report
