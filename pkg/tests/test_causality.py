import math

import numpy as np
import pytest

from perfstream.causality import (
    RepresentativePanel,
    build_report,
    granger_test,
    impulse_response,
    next_sample_count,
    overrun_sample_count,
    progressive_var_fit,
    variance_decomposition,
)

from oracles import mc_fevd, ols_granger_p, ols_var, simulate_var

A_KNOWN = np.array([[0.5, 0.2], [0.0, 0.3]])


def make_panel(data: np.ndarray) -> RepresentativePanel:
    panel = RepresentativePanel(data.shape[1])
    for row in data:
        panel.append(row)
    return panel


class FakeClock:
    def __init__(self, times):
        self.times = list(times)

    def __call__(self):
        return self.times.pop(0)


class TestSampleCountRules:
    def test_growth_rule_exact(self):
        assert next_sample_count(10, 9.0, 1.0) == 30.0
        assert next_sample_count(20, 1.0, 4.0) == 10.0

    def test_overrun_rule_exact(self):
        assert overrun_sample_count(10, 9.0, 4.0) == 15.0
        assert overrun_sample_count(40, 1.0, 4.0) == 20.0

    def test_adaptive_loop_follows_scripted_timings(self):
        rng = np.random.default_rng(0)
        panel = make_panel(rng.normal(size=(10_000, 2)))
        clock = FakeClock([0.0, 0.001, 0.001, 0.004, 0.004, 0.011])
        model = progressive_var_fit(
            panel, latency_budget=0.010, rng=np.random.default_rng(1), clock=clock
        )
        # s path: 10 -> 30 -> 42 (= round(30*sqrt(0.006/0.003)))
        assert model.refits == 3
        assert model.s == 42
        assert model.suggested_s == 42

    def test_overrunning_warm_start_shrinks_suggestion(self):
        rng = np.random.default_rng(2)
        panel = make_panel(rng.normal(size=(10_000, 2)))
        clock = FakeClock([0.0, 0.040])
        model = progressive_var_fit(
            panel, latency_budget=0.010, prev_s=50, rng=np.random.default_rng(1), clock=clock
        )
        assert model.refits == 1
        assert model.s == 50
        assert model.suggested_s == 25


class TestVarFit:
    def test_known_var1_recovered_vs_oracle(self):
        data = simulate_var(A_KNOWN, 0.1**2 * np.eye(2), t=2000, seed=3)
        model = progressive_var_fit(make_panel(data))
        oracle = ols_var((data - data.mean(0)) / data.std(0, ddof=1), p=1)
        assert np.allclose(model.lag_matrix(1), oracle["A"][0], atol=1e-6)
        # standardization of a stationary series barely moves lag-1 dynamics
        assert np.abs(model.lag_matrix(1) - A_KNOWN).max() < 0.05

    def test_full_budgetless_fit_matches_oracle_exactly(self):
        rng = np.random.default_rng(4)
        data = simulate_var(A_KNOWN, np.eye(2), t=500, seed=4)
        model = progressive_var_fit(make_panel(data), p=2)
        std = (data - data.mean(0)) / data.std(0, ddof=1)
        oracle = ols_var(std, p=2)
        assert np.allclose(model.coef, oracle["beta"], atol=1e-6)
        assert np.allclose(model.resid_cov, oracle["resid_cov"], atol=1e-6)

    def test_white_noise_coefficients_insignificant(self):
        within = 0
        seeds = range(40)
        for seed in seeds:
            rng = np.random.default_rng(100 + seed)
            data = rng.normal(size=(800, 2))
            model = progressive_var_fit(make_panel(data))
            se = np.sqrt(
                np.outer(np.diag(model.xtx_inv)[1:], model.sigma2)
            )  # (dp, d) row=coef col=eq
            a = model.coef[1:]
            within += bool(np.all(np.abs(a) < 3.0 * se))
        assert within >= round(0.95 * len(seeds))

    def test_short_panel_returns_none(self):
        assert progressive_var_fit(make_panel(np.zeros((5, 2)))) is None

    def test_collinear_panel_uses_ridge_and_flags(self):
        rng = np.random.default_rng(5)
        base = rng.normal(size=300)
        data = np.column_stack([base, base, rng.normal(size=300)])
        model = progressive_var_fit(make_panel(data))
        assert model is not None
        assert model.ridge

    def test_resid_cov_symmetric_psd(self):
        rng = np.random.default_rng(6)
        data = simulate_var(A_KNOWN, np.eye(2), t=400, seed=6)
        model = progressive_var_fit(make_panel(data))
        cov = model.resid_cov
        assert np.allclose(cov, cov.T, atol=1e-9)
        assert np.linalg.eigvalsh(cov).min() > -1e-9

    def test_invalid_lag_order(self):
        with pytest.raises(ValueError):
            progressive_var_fit(make_panel(np.zeros((100, 2))), p=9)


class TestGranger:
    def test_cause_equals_effect_rejected(self):
        data = simulate_var(A_KNOWN, np.eye(2), t=300, seed=7)
        model = progressive_var_fit(make_panel(data))
        with pytest.raises(ValueError):
            granger_test(model, 1, 1)

    def test_power_on_true_edge(self):
        hits = 0
        seeds = range(30)
        for seed in seeds:
            data = simulate_var(A_KNOWN, np.eye(2), t=2000, seed=1000 + seed)
            model = progressive_var_fit(make_panel(data))
            hits += granger_test(model, cause=1, effect=0) < 0.05
        assert hits >= round(0.90 * len(seeds))

    def test_size_on_null_edge(self):
        rejections = 0
        seeds = range(100)
        for seed in seeds:
            data = simulate_var(A_KNOWN, np.eye(2), t=2000, seed=2000 + seed)
            model = progressive_var_fit(make_panel(data))
            rejections += granger_test(model, cause=0, effect=1) < 0.05
        assert 0.01 * len(seeds) <= rejections <= 0.12 * len(seeds)

    def test_matches_oracle_f_test(self):
        data = simulate_var(A_KNOWN, np.eye(2), t=800, seed=8)
        std = (data - data.mean(0)) / data.std(0, ddof=1)
        model = progressive_var_fit(make_panel(data))
        oracle = ols_var(std, p=1)
        for cause, effect in [(0, 1), (1, 0)]:
            mine = granger_test(model, cause, effect)
            ref = ols_granger_p(oracle, cause, effect, p=1)
            assert abs(mine - ref) < 1e-9

    def test_invariant_to_affine_rescaling(self):
        data = simulate_var(A_KNOWN, np.eye(2), t=600, seed=9)
        scaled = data.copy()
        scaled[:, 1] = 3000.0 * scaled[:, 1] - 77.0
        m1 = progressive_var_fit(make_panel(data))
        m2 = progressive_var_fit(make_panel(scaled))
        for cause, effect in [(0, 1), (1, 0)]:
            assert abs(
                granger_test(m1, cause, effect) - granger_test(m2, cause, effect)
            ) < 1e-9


def _random_stable_model(seed, d=3, p=1):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(p, d, d))
    # scale to spectral radius ~0.7 via the companion matrix
    comp = np.zeros((d * p, d * p))
    comp[:d] = np.hstack(list(a))
    if p > 1:
        comp[d:, :-d] = np.eye(d * (p - 1))
    radius = np.abs(np.linalg.eigvals(comp)).max()
    a = a * (0.7 / max(radius, 0.7))
    b = rng.normal(size=(d, d))
    cov = b @ b.T + 0.1 * np.eye(d)
    data = simulate_var(a, cov, t=400, seed=seed)
    return progressive_var_fit(make_panel(data), p=p)


class TestImpulseResponse:
    def test_zero_coefficients_zero_beyond_horizon_zero(self):
        rng = np.random.default_rng(10)
        data = rng.normal(size=(300, 2)) * [1.0, 2.0]
        model = progressive_var_fit(make_panel(data))
        model.coef[1:] = 0.0
        chol = np.linalg.cholesky(model.resid_cov)
        for shock in range(2):
            for response in range(2):
                ir = impulse_response(model, shock, response, horizon=6)
                assert ir[0] == pytest.approx(chol[response, shock])
                assert np.allclose(ir[1:], 0.0)

    def test_univariate_geometric_recursion(self):
        rng = np.random.default_rng(11)
        data = rng.normal(size=(300, 1))
        model = progressive_var_fit(make_panel(data))
        model.coef[0, 0] = 0.0
        model.coef[1, 0] = 0.5
        model.resid_cov = np.array([[1.0]])
        ir = impulse_response(model, 0, 0, horizon=5)
        assert np.allclose(ir, [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125])

    def test_matches_noiseless_shocked_path_simulation(self):
        model = _random_stable_model(12, d=3, p=2)
        chol = np.linalg.cholesky(model.resid_cov)
        horizon = 12
        a = [model.lag_matrix(lag) for lag in range(1, model.p + 1)]
        for shock in range(3):
            path = np.zeros((horizon + model.p + 1, 3))
            path[model.p] = chol[:, shock]
            for i in range(model.p + 1, horizon + model.p + 1):
                acc = np.zeros(3)
                for lag in range(model.p):
                    acc += a[lag] @ path[i - 1 - lag]
                path[i] = acc
            for response in range(3):
                ir = impulse_response(model, shock, response, horizon)
                assert np.allclose(ir, path[model.p :, response], atol=1e-9)

    def test_negative_horizon_rejected(self):
        model = _random_stable_model(13)
        with pytest.raises(ValueError):
            impulse_response(model, 0, 1, -1)


class TestVarianceDecomposition:
    def test_shares_sum_to_one_random_models(self):
        for seed in range(20):
            model = _random_stable_model(100 + seed)
            for h in (1, 5, 10):
                for target in range(model.d):
                    shares = variance_decomposition(model, target, h)
                    assert shares.min() >= -1e-12
                    assert abs(shares.sum() - 1.0) < 1e-9

    def test_diagonal_system_keeps_own_share(self):
        rng = np.random.default_rng(14)
        data = rng.normal(size=(500, 2)) * [1.0, 3.0]
        model = progressive_var_fit(make_panel(data))
        model.coef[1:] = 0.0
        np.fill_diagonal(model.resid_cov, np.diag(model.resid_cov))
        model.resid_cov = np.diag(np.diag(model.resid_cov))
        shares = variance_decomposition(model, 0, 8)
        assert shares[0] == pytest.approx(1.0)
        assert shares[1] == pytest.approx(0.0)

    def test_matches_monte_carlo_oracle(self):
        data = simulate_var(A_KNOWN, np.array([[1.0, 0.3], [0.3, 1.0]]), t=4000, seed=15)
        model = progressive_var_fit(make_panel(data))
        mine = variance_decomposition(model, 0, 10)
        shares, _ = mc_fevd(
            model.lag_matrix(1), model.resid_cov, target=0, horizon=10,
            paths=200_000, seed=15,
        )
        assert np.abs(mine - shares).max() / max(mine.max(), 1e-9) < 0.02


class TestReport:
    def _driven_model(self, seed=16):
        data = simulate_var(A_KNOWN, np.eye(2), t=2000, seed=seed)
        return progressive_var_fit(make_panel(data))

    def test_from_causality_flags_driver(self):
        report = build_report(self._driven_model(), target=0, direction="from")
        row = report.row_for(1)
        assert row.significant
        assert row.ir > 0.0
        assert 0.0 <= row.vd <= 1.0

    def test_to_causality_is_asymmetric(self):
        report = build_report(self._driven_model(), target=0, direction="to")
        assert not report.row_for(1).significant

    def test_single_series_panel_gives_empty_rows(self):
        rng = np.random.default_rng(17)
        model = progressive_var_fit(make_panel(rng.normal(size=(200, 1))))
        report = build_report(model, target=0)
        assert report.rows == []

    def test_invalid_direction_rejected(self):
        with pytest.raises(ValueError):
            build_report(self._driven_model(), target=0, direction="sideways")
