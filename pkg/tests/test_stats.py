import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from amfkit.errors import (
    ConstantActuals,
    InvalidPValue,
    NotNested,
    PerfectFitDegenerate,
    RankDeficient,
    Underdetermined,
)
from conftest import bhy_oracle
from amfkit.stats import (
    adjusted_r2,
    bhy_adjust,
    nested_anova,
    ols_fit,
    out_of_sample_r2,
)


class TestOlsFit:
    def test_identity_column(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(20)
        fit = ols_fit(y[:, None], y)
        np.testing.assert_allclose(fit.coefficients, [1.0], rtol=1e-12)
        assert fit.rss < 1e-24

    def test_orthogonal_response(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((40, 3))
        raw = rng.standard_normal(40)
        # project the response onto the complement of [X, 1]
        basis = np.column_stack([x, np.ones(40)])
        y = raw - basis @ np.linalg.lstsq(basis, raw, rcond=None)[0]
        fit = ols_fit(x, y)
        np.testing.assert_allclose(fit.coefficients, np.zeros(3), atol=1e-12)
        assert abs(fit.r2) < 1e-12

    def test_matches_extended_precision_normal_equations(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((50, 3))
        y = x @ np.array([1.5, -0.7, 2.2]) + 0.3 * rng.standard_normal(50)
        fit = ols_fit(x, y)
        with mpmath.workdps(50):
            xm = mpmath.matrix(x.tolist())
            ym = mpmath.matrix(y.tolist())
            beta = mpmath.lu_solve(xm.T * xm, xm.T * ym)
        oracle = np.array([float(beta[i]) for i in range(3)])
        np.testing.assert_allclose(fit.coefficients, oracle, rtol=1e-9, atol=1e-12)

    def test_fit_summary_invariants(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((60, 4)) * np.array([1.0, 10.0, 0.1, 5.0])
        y = x @ np.array([1.0, 0.2, -3.0, 0.0]) + rng.standard_normal(60)
        fit = ols_fit(x, y)
        # residuals orthogonal to every design column, scaled by column norms
        for j in range(4):
            col = x[:, j]
            assert abs(col @ fit.residuals) <= 1e-8 * np.linalg.norm(col) * np.linalg.norm(fit.residuals) + 1e-8
        np.testing.assert_allclose(fit.rss, fit.residuals @ fit.residuals, rtol=1e-10)
        expected_p = 2 * (1 - sps.t.cdf(np.abs(fit.t_stats), fit.df_resid))
        np.testing.assert_allclose(fit.p_values, expected_p, atol=1e-12)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal(30)
        base = ols_fit(x, y)
        for j, c in ((0, 2.0), (2, -0.25)):
            scaled = x.copy()
            scaled[:, j] *= c
            fit = ols_fit(scaled, y)
            np.testing.assert_allclose(fit.coefficients[j], base.coefficients[j] / c, rtol=1e-9)
            np.testing.assert_allclose(fit.fitted, base.fitted, rtol=0, atol=1e-10)

    def test_rank_deficient_reports_column(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((25, 3))
        x = np.column_stack([x, x[:, 0] + x[:, 1]])
        with pytest.raises(RankDeficient) as err:
            ols_fit(x, rng.standard_normal(25))
        assert err.value.column in (0, 1, 3)

    def test_underdetermined(self):
        with pytest.raises(Underdetermined):
            ols_fit(np.ones((3, 3)), np.ones(3))


class TestNestedAnova:
    def _fit_pair(self, rng, n=40, p_base=2, p_extra=2, signal=True):
        base = rng.standard_normal((n, p_base))
        extra = rng.standard_normal((n, p_extra))
        beta = np.arange(1, p_base + 1, dtype=float)
        y = base @ beta + rng.standard_normal(n)
        if signal:
            y = y + extra @ np.full(p_extra, 0.8)
        reduced = ols_fit(base, y)
        full = ols_fit(np.hstack([base, extra]), y)
        return full, reduced, n

    def test_no_improvement_gives_unit_p(self):
        full = _summary_stub(rss=7.5, df_resid=20, n=24)
        reduced = _summary_stub(rss=7.5, df_resid=21, n=24)
        res = nested_anova(full, reduced, 24)
        assert res.f_stat == 0.0 and res.p_value == 1.0

    def test_direct_formula(self):
        # rss_r = 10, rss_f = 5, df1 = 1, df2 = 20 -> F = 20
        full = _summary_stub(rss=5.0, df_resid=20, n=24)
        reduced = _summary_stub(rss=10.0, df_resid=21, n=24)
        res = nested_anova(full, reduced, 24)
        assert res.f_stat == pytest.approx(20.0, rel=1e-12)
        assert res.df1 == 1 and res.df2 == 20
        assert res.p_value == pytest.approx(1 - sps.f.cdf(20.0, 1, 20), abs=1e-12)

    def test_monte_carlo_size(self):
        rng = np.random.default_rng(12345)
        n, reps = 30, 10_000
        rejections = 0
        pvals = np.empty(reps)
        for i in range(reps):
            full, reduced, _ = self._fit_pair(rng, n=n, signal=False)
            p = nested_anova(full, reduced, n).p_value
            pvals[i] = p
            rejections += p < 0.05
        rate = rejections / reps
        assert 0.035 <= rate <= 0.065
        # under the null p-values are uniform
        ks = sps.kstest(pvals, "uniform").statistic
        assert ks < 0.02

    def test_not_nested(self):
        full = _summary_stub(rss=5.0, df_resid=20, n=24)
        reduced = _summary_stub(rss=4.0, df_resid=21, n=24)
        with pytest.raises(NotNested):
            nested_anova(full, reduced, 24)
        with pytest.raises(NotNested):
            nested_anova(full, _summary_stub(rss=6.0, df_resid=20, n=24), 24)

    def test_perfect_fit_degenerate(self):
        full = _summary_stub(rss=0.0, df_resid=20, n=24)
        reduced = _summary_stub(rss=10.0, df_resid=21, n=24)
        with pytest.raises(PerfectFitDegenerate):
            nested_anova(full, reduced, 24)


def _summary_stub(rss, df_resid, n):
    from amfkit.stats import FitSummary

    z = np.zeros(1)
    return FitSummary(z, z, z, z, np.zeros(n), np.zeros(n), rss, 0.0, 0.0, df_resid, n)


class TestAdjustedR2:
    def test_perfect_fit(self):
        assert adjusted_r2(1.0, 100, 5) == 1.0

    def test_direct_formula(self):
        assert adjusted_r2(0.5, 11, 1) == pytest.approx(4.0 / 9.0, rel=1e-12)

    def test_never_exceeds_r2(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(10, 200))
            p = int(rng.integers(1, n - 2))
            r2 = float(rng.uniform(-0.5, 1.0))
            assert adjusted_r2(r2, n, p) <= r2 + 1e-12

    def test_underdetermined(self):
        with pytest.raises(Underdetermined):
            adjusted_r2(0.5, 5, 4)


class TestOutOfSampleR2:
    def test_perfect_prediction(self):
        a = np.array([1.0, 2.0, 3.0])
        assert out_of_sample_r2(a, a, 0.5) == 1.0

    def test_train_mean_benchmark(self):
        a = np.array([1.0, 2.0, 3.0])
        assert out_of_sample_r2(np.full(3, 2.0), a, 2.0) == 0.0

    def test_noiseless_model(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((120, 2))
        beta = np.array([1.2, -0.4])
        y = x @ beta
        fit = ols_fit(x[:100], y[:100])
        preds = x[100:] @ fit.coefficients
        r2 = out_of_sample_r2(preds, y[100:], float(y[:100].mean()))
        assert abs(r2 - 1.0) <= 1e-8

    def test_constant_actuals(self):
        with pytest.raises(ConstantActuals):
            out_of_sample_r2(np.zeros(3), np.full(3, 1.5), 1.5)


class TestBhyAdjust:
    def test_worked_example(self):
        q = bhy_adjust(np.array([0.01, 0.02, 0.04]))
        np.testing.assert_allclose(q, [0.055, 0.055, 0.0733333333333333], atol=1e-12)

    def test_all_ones(self):
        assert np.array_equal(bhy_adjust(np.ones(5)), np.ones(5))

    def test_single_p_identity(self):
        np.testing.assert_allclose(bhy_adjust(np.array([0.37])), [0.37], atol=1e-15)

    def test_matches_oracle_on_random_vectors(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            m = int(rng.integers(1, 40))
            p = rng.uniform(0, 1, size=m)
            np.testing.assert_allclose(bhy_adjust(p), bhy_oracle(p), atol=1e-12)

    def test_invalid_p(self):
        with pytest.raises(InvalidPValue):
            bhy_adjust(np.array([0.5, 1.2]))
        with pytest.raises(InvalidPValue):
            bhy_adjust(np.array([0.5, np.nan]))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=25))
    def test_sorted_p_gives_sorted_q(self, p_list):
        p = np.sort(np.asarray(p_list))
        q = bhy_adjust(p)
        assert np.all(np.diff(q) >= -1e-15)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=25),
        st.randoms(use_true_random=False),
    )
    def test_permutation_equivariance(self, p_list, rnd):
        p = np.asarray(p_list)
        perm = list(range(len(p)))
        rnd.shuffle(perm)
        perm = np.asarray(perm)
        np.testing.assert_allclose(bhy_adjust(p)[perm], bhy_adjust(p[perm]), atol=1e-14)

    def test_null_discovery_fraction_controlled(self):
        rng = np.random.default_rng(77)
        m = 2000
        q = bhy_adjust(rng.uniform(0, 1, size=m))
        frac = float(np.mean(q < 0.05))
        assert frac <= 0.05 + 3 * np.sqrt(0.05 * 0.95 / m)
