import numpy as np
import pytest

from valdesign.errors import InvalidLevel, RankDeficient, TooFewRows
from valdesign.linear_model import ols_fit, predict, wald_ci
from valdesign.special import t_quantile

from test_numerics import explicit_inverse


def brute_force_ols(design, response):
    """Independent oracle: coefficients via explicit (W'W)^-1 W'y, q <= 3."""
    design = np.asarray(design, dtype=float)
    gram_inv = explicit_inverse(design.T @ design)
    return gram_inv @ (design.T @ response)


def with_intercept(x):
    x = np.asarray(x, dtype=float)
    return np.column_stack([np.ones(len(x)), x])


class TestOlsFit:
    def test_exact_fit(self):
        x = np.array([0.0, 1.0, 2.0])
        model = ols_fit(with_intercept(x), x)
        assert np.allclose(model.coefficients, [0.0, 1.0], atol=1e-12)
        assert model.residual_variance == pytest.approx(0.0, abs=1e-24)

    def test_hand_solved_two_by_two(self):
        x = np.array([0.0, 1.0, 2.0])
        y = np.array([1.0, 1.0, 4.0])
        model = ols_fit(with_intercept(x), y)
        assert np.allclose(model.coefficients, [0.5, 1.5], atol=1e-12)

    def test_collinear_rejected(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        design = np.column_stack([np.ones(4), x, 2.0 * x])
        with pytest.raises(RankDeficient):
            ols_fit(design, x)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            ols_fit(np.ones((2, 2)), np.zeros(2))

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(31415)
        for _ in range(1000):
            n = int(rng.integers(5, 30))
            q = int(rng.integers(1, 4))
            design = np.column_stack([np.ones(n)] + [rng.normal(size=n) for _ in range(q - 1)])
            y = rng.normal(size=n)
            model = ols_fit(design, y)
            expected = brute_force_ols(design, y)
            assert np.abs(model.coefficients - expected).max() <= 1e-10 * max(1.0, np.abs(expected).max())

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(2718)
        design = np.column_stack([np.ones(200), rng.normal(size=200), rng.normal(size=200)])
        y = rng.normal(size=200)
        model = ols_fit(design, y)
        residuals = y - predict(model, design)
        assert np.abs(design.T @ residuals).max() <= 1e-8

    def test_constant_response(self):
        rng = np.random.default_rng(7)
        design = np.column_stack([np.ones(50), rng.normal(size=50)])
        model = ols_fit(design, np.full(50, 4.0))
        assert model.coefficients[0] == pytest.approx(4.0)
        assert abs(model.coefficients[1]) <= 1e-8

    def test_covariance_and_df(self):
        rng = np.random.default_rng(12)
        design = np.column_stack([np.ones(40), rng.normal(size=40)])
        y = rng.normal(size=40)
        model = ols_fit(design, y)
        assert model.df_residual == 38
        gram = design.T @ design
        expected_cov = model.residual_variance * explicit_inverse(gram)
        assert np.abs(model.coef_covariance - expected_cov).max() <= 1e-10


class TestWaldCi:
    def test_zero_variance_zero_width(self):
        x = np.array([0.0, 1.0, 2.0])
        model = ols_fit(with_intercept(x), 2.0 * x)
        low, high = wald_ci(model, 1, 0.95)
        assert low == pytest.approx(2.0, abs=1e-9)
        assert high == pytest.approx(2.0, abs=1e-9)

    def test_normal_quantile_regime(self):
        # synthetic model: estimate 2.0, SE 0.5, huge df -> z quantile 1.95996...
        from valdesign.linear_model import FittedLinearModel

        model = FittedLinearModel(
            coefficients=np.array([2.0]),
            residual_variance=1.0,
            coef_covariance=np.array([[0.25]]),
            df_residual=10**6,
            gram_inverse=np.array([[0.25]]),
        )
        low, high = wald_ci(model, 0, 0.95)
        assert low == pytest.approx(2.0 - 1.959964 * 0.5, abs=1e-4)
        assert high == pytest.approx(2.0 + 1.959964 * 0.5, abs=1e-4)

    def test_width_monotone_in_level(self):
        rng = np.random.default_rng(99)
        design = np.column_stack([np.ones(30), rng.normal(size=30)])
        model = ols_fit(design, rng.normal(size=30))
        lo95, hi95 = wald_ci(model, 1, 0.95)
        lo90, hi90 = wald_ci(model, 1, 0.90)
        assert hi95 - lo95 > hi90 - lo90

    def test_invalid_level(self):
        x = np.array([0.0, 1.0, 2.0])
        model = ols_fit(with_intercept(x), x)
        with pytest.raises(InvalidLevel):
            wald_ci(model, 0, 1.0)


class TestTQuantile:
    # reference values from standard t tables
    @pytest.mark.parametrize(
        "df,p,expected",
        [
            (1, 0.975, 12.706204736432095),
            (2, 0.975, 4.302652729911275),
            (5, 0.975, 2.5705818366147395),
            (10, 0.975, 2.2281388519649385),
            (29, 0.95, 1.6991270265334972),
            (100, 0.995, 2.625890521163656),
        ],
    )
    def test_reference_values(self, df, p, expected):
        assert t_quantile(df, p) == pytest.approx(expected, abs=1e-8)

    def test_symmetry(self):
        assert t_quantile(7, 0.975) == pytest.approx(-t_quantile(7, 0.025), abs=1e-12)

    def test_fractional_df(self):
        value = t_quantile(3.5, 0.9)
        assert t_quantile(3.0, 0.9) > value > t_quantile(4.0, 0.9)
