"""Design-aware imputation of unvalidated exposures.

Every variable a design ordered on must appear in the imputation model, or
the analysis inherits selection bias; recipes are therefore built from the
``DesignSpec`` and nowhere else. Deterministic single imputation plugs the
fitted prediction in as if observed. Multiple imputation adds the analysis
outcome to the recipe (congeniality), draws the residual variance from its
scaled inverse chi-square posterior and the coefficients from the matching
normal, perturbs each imputed value with residual noise, and pools the
per-imputation analyses with Rubin's rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .designs import DesignSpec, ETS_PC1, ETS_VAR, SRS
from .errors import (
    InvalidLevel,
    InvalidParameter,
    MissingDesignArtifact,
    MissingPredictor,
    TooFewImputations,
    TooFewValidated,
)
from .linear_model import FittedLinearModel, ols_fit
from .randvar import RngStream, mvn_sample, scaled_inv_chisq_sample
from .special import normal_quantile, t_quantile
from .table import StudyTable

SINGLE = "single"
MULTIPLE = "multiple"

INTERCEPT = "intercept"
ERROR_PRONE = "xstar"
CONFOUNDERS = "confounders"
PC1 = "pc1"
OUTCOME = "outcome"


@dataclass(frozen=True)
class PredictorRecipe:
    """Ordered predictor list for one exposure's imputation model.

    Built only by ``build_predictor_recipe`` so that the design variables can
    never be dropped.
    """

    model_index: int
    mode: str
    design: DesignSpec
    terms: tuple[tuple, ...]

    def term_names(self, table: StudyTable) -> list[str]:
        names = []
        for term in self.terms:
            if term[0] == INTERCEPT:
                names.append("intercept")
            elif term[0] == ERROR_PRONE:
                names.append(table.errorprone_names[term[1] - 1])
            elif term[0] == CONFOUNDERS:
                names.extend(table.confounder_names)
            elif term[0] == PC1:
                names.append("pc1_score")
            elif term[0] == OUTCOME:
                names.append(table.outcome_names[0 if table.y.shape[1] == 1 else term[1] - 1])
        return names


def build_predictor_recipe(design: DesignSpec, j: int, mode: str) -> PredictorRecipe:
    """Predictor list for imputing exposure ``j`` under ``design``.

    Single imputation: intercept, the model's own error-prone exposure, and
    the confounders; plus the design's ordering variable (the targeted
    exposure, or the first principal component) whenever the model itself did
    not supply it. Multiple imputation appends the model's outcome.
    """
    if mode not in (SINGLE, MULTIPLE):
        raise InvalidParameter(f"mode must be 'single' or 'multiple', got {mode!r}")
    terms: list[tuple] = [(INTERCEPT,), (ERROR_PRONE, j), (CONFOUNDERS,)]
    if design.kind == ETS_VAR:
        if design.target_variable is None:
            raise MissingDesignArtifact("ets-var design spec lacks its target variable")
        if j != design.target_variable:
            terms.append((ERROR_PRONE, design.target_variable))
    elif design.kind == ETS_PC1:
        if design.pc1_scores is None:
            raise MissingDesignArtifact("ets-pc1 design spec lacks its component scores")
        terms.append((PC1,))
    elif design.kind != SRS:
        raise InvalidParameter(f"unknown design kind {design.kind!r}")
    if mode == MULTIPLE:
        terms.append((OUTCOME, j))
    return PredictorRecipe(model_index=j, mode=mode, design=design, terms=tuple(terms))


def _assemble_design_matrix(recipe: PredictorRecipe, table: StudyTable, rows=None) -> np.ndarray:
    if rows is None:
        rows = np.ones(table.n_rows, dtype=bool)
    n = int(rows.sum())
    columns = []
    for term in recipe.terms:
        if term[0] == INTERCEPT:
            columns.append(np.ones(n))
        elif term[0] == ERROR_PRONE:
            if table.xstar is None:
                raise MissingPredictor("table has no error-prone exposure columns")
            columns.append(table.xstar[rows, term[1] - 1])
        elif term[0] == CONFOUNDERS:
            for k in range(table.z.shape[1]):
                columns.append(table.z[rows, k])
        elif term[0] == PC1:
            scores = recipe.design.pc1_scores
            if scores is None:
                raise MissingDesignArtifact("ets-pc1 design spec lacks its component scores")
            if scores.shape[0] != table.n_rows:
                raise MissingPredictor("component scores do not cover every table row")
            columns.append(scores[rows])
        elif term[0] == OUTCOME:
            columns.append(table.outcome_for_model(term[1])[rows])
    return np.column_stack(columns)


@dataclass(frozen=True)
class ImputationFit:
    """Imputation model for one exposure, fitted on the validated rows only."""

    model_index: int
    recipe: PredictorRecipe
    fitted: FittedLinearModel


def fit_imputation_model(table: StudyTable, recipe: PredictorRecipe) -> ImputationFit:
    validated = table.validated_rows()
    n_val = int(validated.sum())
    design_matrix = _assemble_design_matrix(recipe, table, validated)
    if n_val < design_matrix.shape[1] + 2:
        raise TooFewValidated(
            f"{n_val} validated rows cannot support {design_matrix.shape[1]} predictors"
        )
    response = table.x[validated, recipe.model_index - 1]
    if not np.isfinite(response).all():
        raise MissingPredictor("validated rows are missing error-free exposure values")
    fitted = ols_fit(design_matrix, response)
    return ImputationFit(model_index=recipe.model_index, recipe=recipe, fitted=fitted)


def impute_deterministic(fit: ImputationFit, table: StudyTable) -> np.ndarray:
    """Exposure column with model predictions where validation is missing."""
    j = fit.model_index
    column = table.x[:, j - 1].copy()
    missing = table.r == 0
    if missing.any():
        matrix = _assemble_design_matrix(fit.recipe, table, missing)
        column[missing] = matrix @ fit.fitted.coefficients
    if not np.isfinite(column).all():
        raise MissingPredictor("imputation left non-finite exposure values")
    return column


def draw_imputation(rng: RngStream, fit: ImputationFit, table: StudyTable) -> np.ndarray:
    """One proper stochastic imputation of the exposure column.

    Draws sigma2 from its scaled inverse chi-square posterior, coefficients
    from N(alpha_hat, sigma2 * (W'W)^-1), then adds N(0, sigma2) noise to each
    imputed value. A zero residual variance collapses to the deterministic
    prediction.
    """
    model = fit.fitted
    if model.residual_variance == 0.0:
        return impute_deterministic(fit, table)
    j = fit.model_index
    column = table.x[:, j - 1].copy()
    missing = table.r == 0
    sigma2 = scaled_inv_chisq_sample(rng, model.df_residual, model.residual_variance)
    coef = mvn_sample(rng, model.coefficients, sigma2 * model.gram_inverse, 1)[0]
    if missing.any():
        matrix = _assemble_design_matrix(fit.recipe, table, missing)
        noise = math.sqrt(sigma2) * rng.normals(int(missing.sum()))
        column[missing] = matrix @ coef + noise
    return column


@dataclass(frozen=True)
class PooledEstimate:
    """Rubin-pooled estimate with within/between/total variance and t interval."""

    estimate: float
    within_var: float
    between_var: float
    total_var: float
    df: float
    level: float
    ci: tuple[float, float]
    n_imputations: int

    @property
    def ci_width(self) -> float:
        return self.ci[1] - self.ci[0]


def rubin_pool(estimates, variances, level: float) -> PooledEstimate:
    """Pool per-imputation estimates: T = W + (1 + 1/M) B, classical df."""
    estimates = np.asarray(estimates, dtype=float)
    variances = np.asarray(variances, dtype=float)
    m = estimates.shape[0]
    if m < 2 or variances.shape[0] != m:
        raise TooFewImputations(f"need at least 2 matching imputations, got {m}")
    if (variances < 0).any():
        raise InvalidParameter("per-imputation variances must be nonnegative")
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"confidence level must be inside (0, 1), got {level}")
    q_bar = float(estimates.mean())
    within = float(variances.mean())
    between = float(estimates.var(ddof=1))
    total = within + (1.0 + 1.0 / m) * between
    if between == 0.0:
        df = math.inf
        quantile = normal_quantile(0.5 * (1.0 + level))
    else:
        df = (m - 1) * (1.0 + within / ((1.0 + 1.0 / m) * between)) ** 2
        quantile = t_quantile(df, 0.5 * (1.0 + level))
    half_width = quantile * math.sqrt(total)
    return PooledEstimate(
        estimate=q_bar,
        within_var=within,
        between_var=between,
        total_var=total,
        df=df,
        level=level,
        ci=(q_bar - half_width, q_bar + half_width),
        n_imputations=m,
    )


def _analysis_matrix(table: StudyTable, exposure_column: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(table.n_rows), exposure_column, table.z])


def analysis_coefficient_names(table: StudyTable, j: int) -> list[str]:
    return ["intercept", table.exposure_names[j - 1], *table.confounder_names]


def analyze_single_imputation(table: StudyTable, design: DesignSpec, j: int) -> FittedLinearModel:
    """Fit outcome ~ exposure + confounders with the exposure singly imputed."""
    recipe = build_predictor_recipe(design, j, SINGLE)
    fit = fit_imputation_model(table, recipe)
    exposure = impute_deterministic(fit, table)
    return ols_fit(_analysis_matrix(table, exposure), table.outcome_for_model(j))


def analyze_multiple_imputation(
    rng: RngStream,
    table: StudyTable,
    design: DesignSpec,
    j: int,
    m_imputations: int,
    level: float,
) -> list[PooledEstimate]:
    """Multiply impute exposure ``j``, refit the analysis model each time, pool.

    Returns one pooled estimate per analysis coefficient (intercept first).
    Imputation draws use child streams keyed by draw index, so results do not
    depend on scheduling.
    """
    if m_imputations < 2:
        raise TooFewImputations(f"need at least 2 imputations, got {m_imputations}")
    recipe = build_predictor_recipe(design, j, MULTIPLE)
    fit = fit_imputation_model(table, recipe)
    outcome = table.outcome_for_model(j)
    estimates = []
    variances = []
    for draw in range(m_imputations):
        column = draw_imputation(rng.substream(draw), fit, table)
        model = ols_fit(_analysis_matrix(table, column), outcome)
        estimates.append(model.coefficients)
        variances.append(model.coef_covariance.diagonal())
    estimates = np.asarray(estimates)
    variances = np.asarray(variances)
    return [
        rubin_pool(estimates[:, k], variances[:, k], level)
        for k in range(estimates.shape[1])
    ]
