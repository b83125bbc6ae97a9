import math

import numpy as np
import pytest

from valdesign.designs import (
    DesignSpec,
    ETS_PC1,
    ETS_VAR,
    SRS,
    ValidationSelection,
    design_srs,
    select_validation,
)
from valdesign.errors import (
    InvalidParameter,
    MissingDesignArtifact,
    TooFewImputations,
    TooFewValidated,
)
from valdesign.imputation import (
    CONFOUNDERS,
    ERROR_PRONE,
    INTERCEPT,
    MULTIPLE,
    OUTCOME,
    PC1,
    SINGLE,
    analyze_multiple_imputation,
    analyze_single_imputation,
    build_predictor_recipe,
    draw_imputation,
    fit_imputation_model,
    impute_deterministic,
    rubin_pool,
)
from valdesign.linear_model import ols_fit
from valdesign.randvar import derive_stream, mvn_sample
from valdesign.table import StudyTable

from test_numerics import explicit_inverse


def make_table(n=200, p=2, sigma_u=1.0, seed=5, rho=0.5, slope_scale=1.0):
    """Small synthetic study: correlated exposures, additive error, one confounder."""
    rng = derive_stream(seed, 0)
    cov = np.full((p, p), rho)
    np.fill_diagonal(cov, 1.0)
    x = mvn_sample(rng, np.zeros(p), cov, n)
    xstar = x + sigma_u * rng.normals(n * p).reshape(n, p)
    z = (rng.uniforms(n) < 0.3).astype(float).reshape(n, 1)
    eps = rng.normals(n * p).reshape(n, p)
    y = np.column_stack(
        [slope_scale * (j + 1) * 0.5 * x[:, j] + 0.1 * z[:, 0] + eps[:, j] for j in range(p)]
    )
    return StudyTable(y=y, x=x, z=z, r=np.zeros(n, dtype=np.int8), xstar=xstar)


def validate_all(table):
    selection = ValidationSelection(
        indicator=np.ones(table.n_rows, dtype=np.int8),
        selected_indices=np.arange(table.n_rows),
    )
    return table.with_validation(selection)


class TestBuildPredictorRecipe:
    def test_srs(self):
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=10), 2, SINGLE)
        assert recipe.terms == ((INTERCEPT,), (ERROR_PRONE, 2), (CONFOUNDERS,))

    def test_ets_var_other_model_gains_design_variable(self):
        spec = DesignSpec(kind=ETS_VAR, n_validate=10, target_variable=1)
        recipe = build_predictor_recipe(spec, 3, SINGLE)
        assert recipe.terms == (
            (INTERCEPT,),
            (ERROR_PRONE, 3),
            (CONFOUNDERS,),
            (ERROR_PRONE, 1),
        )

    def test_ets_var_targeted_model_unchanged(self):
        spec = DesignSpec(kind=ETS_VAR, n_validate=10, target_variable=1)
        recipe = build_predictor_recipe(spec, 1, SINGLE)
        assert recipe.terms == ((INTERCEPT,), (ERROR_PRONE, 1), (CONFOUNDERS,))

    def test_ets_pc1_multiple_appends_outcome(self):
        table = make_table()
        _, spec = select_validation(None, table.xstar, ETS_PC1, 20)
        recipe = build_predictor_recipe(spec, 1, MULTIPLE)
        assert recipe.terms == (
            (INTERCEPT,),
            (ERROR_PRONE, 1),
            (CONFOUNDERS,),
            (PC1,),
            (OUTCOME, 1),
        )

    def test_missing_scores_refused(self):
        spec = DesignSpec(kind=ETS_PC1, n_validate=10)
        with pytest.raises(MissingDesignArtifact):
            build_predictor_recipe(spec, 1, SINGLE)

    def test_bad_mode(self):
        with pytest.raises(InvalidParameter):
            build_predictor_recipe(DesignSpec(kind=SRS, n_validate=10), 1, "triple")


class TestFitImputationModel:
    def test_error_free_regime_recovers_identity(self):
        table = make_table(sigma_u=0.0, n=300)
        selection = design_srs(derive_stream(1, 1), table.n_rows, 100)
        masked = table.with_validation(selection)
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=100), 1, SINGLE)
        fit = fit_imputation_model(masked, recipe)
        assert np.abs(fit.fitted.coefficients - [0.0, 1.0, 0.0]).max() <= 1e-8

    def test_attenuation_against_brute_force(self):
        # classical measurement error: slope of X on X* is Var(X)/(Var(X)+sigma_u^2)
        table = make_table(n=10**5, p=1, sigma_u=1.0, seed=77)
        masked = validate_all(table)
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=10**5), 1, SINGLE)
        fit = fit_imputation_model(masked, recipe)
        design = np.column_stack([np.ones(table.n_rows), table.xstar[:, 0], table.z[:, 0]])
        oracle = explicit_inverse(design.T @ design) @ (design.T @ table.x[:, 0])
        assert np.abs(fit.fitted.coefficients - oracle).max() <= 1e-10
        assert abs(fit.fitted.coefficients[1] - 0.5) < 0.01

    def test_too_few_validated(self):
        table = make_table(n=30)
        selection = design_srs(derive_stream(2, 2), 30, 4)
        masked = table.with_validation(selection)
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=4), 1, SINGLE)
        with pytest.raises(TooFewValidated):
            fit_imputation_model(masked, recipe)


def exact_fit_table():
    """Validated rows on the line x = 1 + 2*xstar plus one unvalidated row at 0.5."""
    xstar = np.array([[0.0], [1.0], [2.0], [3.0], [0.5]])
    x = 1.0 + 2.0 * xstar
    x[4, 0] = np.nan
    y = np.zeros((5, 1))
    z = np.zeros((5, 0))
    r = np.array([1, 1, 1, 1, 0], dtype=np.int8)
    return StudyTable(y=y, x=x, z=z, r=r, xstar=xstar)


class TestImputeDeterministic:
    def test_exact_fit_prediction(self):
        table = exact_fit_table()
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=4), 1, SINGLE)
        fit = fit_imputation_model(table, recipe)
        assert np.allclose(fit.fitted.coefficients, [1.0, 2.0], atol=1e-12)
        column = impute_deterministic(fit, table)
        assert column[4] == pytest.approx(2.0, abs=1e-12)
        assert np.array_equal(column[:4], table.x[:4, 0])

    def test_fully_validated_untouched(self):
        table = validate_all(make_table(n=60))
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=60), 1, SINGLE)
        fit = fit_imputation_model(table, recipe)
        assert np.array_equal(impute_deterministic(fit, table), table.x[:, 0])


class TestDrawImputation:
    def test_zero_variance_collapses(self):
        table = exact_fit_table()
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=4), 1, SINGLE)
        fit = fit_imputation_model(table, recipe)
        drawn = draw_imputation(derive_stream(3, 3), fit, table)
        assert drawn[4] == pytest.approx(2.0, abs=1e-9)

    def test_mean_of_draws_near_deterministic(self):
        table = make_table(n=120, seed=11)
        selection = design_srs(derive_stream(4, 4), 120, 60)
        masked = table.with_validation(selection)
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=60), 1, SINGLE)
        fit = fit_imputation_model(masked, recipe)
        target_row = int(np.flatnonzero(masked.r == 0)[0])
        prediction = impute_deterministic(fit, masked)[target_row]
        rng = derive_stream(5, 5)
        draws = np.array(
            [draw_imputation(rng.substream(i), fit, masked)[target_row] for i in range(10**4)]
        )
        tolerance = 4 * draws.std(ddof=1) / math.sqrt(draws.shape[0])
        assert abs(draws.mean() - prediction) < tolerance

    def test_distinct_streams_differ(self):
        table = make_table(n=80, seed=21)
        masked = table.with_validation(design_srs(derive_stream(6, 6), 80, 40))
        recipe = build_predictor_recipe(DesignSpec(kind=SRS, n_validate=40), 1, SINGLE)
        fit = fit_imputation_model(masked, recipe)
        a = draw_imputation(derive_stream(7, 0), fit, masked)
        b = draw_imputation(derive_stream(7, 1), fit, masked)
        assert not np.array_equal(a, b)
        assert np.array_equal(a[masked.r == 1], b[masked.r == 1])


class TestRubinPool:
    def test_worked_example(self):
        pooled = rubin_pool([1.0, 3.0], [0.5, 0.5], 0.95)
        assert pooled.estimate == 2.0
        assert pooled.within_var == 0.5
        assert pooled.between_var == 2.0
        assert pooled.total_var == 3.5
        assert pooled.ci[0] < 2.0 < pooled.ci[1]

    def test_identical_estimates(self):
        pooled = rubin_pool([1.5, 1.5, 1.5], [0.2, 0.2, 0.2], 0.95)
        assert pooled.between_var == 0.0
        assert pooled.total_var == pooled.within_var
        assert math.isinf(pooled.df)

    def test_zero_estimates(self):
        pooled = rubin_pool([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.95)
        assert pooled.estimate == 0.0
        assert pooled.total_var == 1.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(808)
        for _ in range(25):
            m = int(rng.integers(2, 12))
            estimates = rng.normal(size=m)
            variances = rng.uniform(0.1, 2.0, size=m)
            base = rubin_pool(estimates, variances, 0.9)
            perm = rng.permutation(m)
            shuffled = rubin_pool(estimates[perm], variances[perm], 0.9)
            assert shuffled.estimate == pytest.approx(base.estimate, abs=1e-12)
            assert shuffled.total_var == pytest.approx(base.total_var, abs=1e-12)
            assert base.total_var >= base.within_var
            if np.ptp(estimates) > 0:
                assert base.total_var > base.within_var

    def test_too_few(self):
        with pytest.raises(TooFewImputations):
            rubin_pool([1.0], [0.5], 0.95)


class TestAnalyzeSingleImputation:
    def test_fully_validated_matches_gold_standard(self):
        table = validate_all(make_table(n=150, seed=31))
        spec = DesignSpec(kind=SRS, n_validate=150)
        model = analyze_single_imputation(table, spec, 2)
        gold_design = np.column_stack([np.ones(150), table.x[:, 1], table.z])
        gold = ols_fit(gold_design, table.y[:, 1])
        assert np.abs(model.coefficients - gold.coefficients).max() <= 1e-12

    def test_zero_variance_outcome(self):
        table = make_table(n=100, seed=41)
        flat = StudyTable(
            y=np.full_like(table.y, 3.0), x=table.x, z=table.z, r=table.r, xstar=table.xstar
        )
        masked = flat.with_validation(design_srs(derive_stream(8, 8), 100, 50))
        model = analyze_single_imputation(masked, DesignSpec(kind=SRS, n_validate=50), 1)
        assert model.coefficients[0] == pytest.approx(3.0, abs=1e-8)
        assert np.abs(model.coefficients[1:]).max() <= 1e-8

    def test_runs_under_every_design(self):
        table = make_table(n=200, seed=51)
        for kind in (SRS, ETS_VAR, ETS_PC1):
            selection, spec = select_validation(
                derive_stream(9, 9), table.xstar, kind, 60, target_variable=1
            )
            masked = table.with_validation(selection)
            for j in (1, 2):
                model = analyze_single_imputation(masked, spec, j)
                assert np.isfinite(model.coefficients).all()


class TestAnalyzeMultipleImputation:
    def test_fully_validated_recovers_gold_standard(self):
        table = validate_all(make_table(n=150, seed=61))
        spec = DesignSpec(kind=SRS, n_validate=150)
        pooled = analyze_multiple_imputation(derive_stream(10, 0), table, spec, 1, 5, 0.95)
        gold_design = np.column_stack([np.ones(150), table.x[:, 0], table.z])
        gold = ols_fit(gold_design, table.y[:, 0])
        assert pooled[1].estimate == pytest.approx(gold.coefficients[1], abs=1e-12)
        assert pooled[1].between_var == pytest.approx(0.0, abs=1e-20)

    def test_same_seed_reproduces(self):
        table = make_table(n=180, seed=71)
        masked = table.with_validation(design_srs(derive_stream(11, 0), 180, 60))
        spec = DesignSpec(kind=SRS, n_validate=60)
        first = analyze_multiple_imputation(derive_stream(12, 0), masked, spec, 1, 10, 0.95)
        second = analyze_multiple_imputation(derive_stream(12, 0), masked, spec, 1, 10, 0.95)
        assert first[1].estimate == second[1].estimate
        assert first[1].ci == second[1].ci

    def test_seventy_five_imputations_run(self):
        table = make_table(n=150, seed=81)
        masked = table.with_validation(design_srs(derive_stream(13, 0), 150, 50))
        spec = DesignSpec(kind=SRS, n_validate=50)
        pooled = analyze_multiple_imputation(derive_stream(14, 0), masked, spec, 1, 75, 0.95)
        slope = pooled[1]
        assert slope.n_imputations == 75
        assert slope.ci[0] < slope.estimate < slope.ci[1]
        assert slope.total_var >= slope.within_var

    def test_too_few_imputations(self):
        table = validate_all(make_table(n=50, seed=91))
        with pytest.raises(TooFewImputations):
            analyze_multiple_imputation(
                derive_stream(15, 0), table, DesignSpec(kind=SRS, n_validate=50), 1, 1, 0.95
            )
