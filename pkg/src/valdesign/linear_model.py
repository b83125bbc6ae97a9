"""Ordinary least squares with Wald intervals.

The caller supplies the full design matrix, intercept column included; the
imputation recipes upstream assemble their predictors explicitly. Normal
equations are solved through a Cholesky factorization of the Gram matrix,
which also yields the inverse needed for posterior coefficient draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidLevel, RankDeficient, TooFewRows
from .numerics import _back_sub_transpose, _forward_sub
from .special import t_quantile

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class FittedLinearModel:
    """OLS fit: coefficients, residual variance, and coefficient covariance.

    ``gram_inverse`` is (W'W)^-1, retained so stochastic imputation can draw
    coefficient vectors from N(coefficients, sigma2 * gram_inverse).
    """

    coefficients: np.ndarray
    residual_variance: float
    coef_covariance: np.ndarray
    df_residual: int
    gram_inverse: np.ndarray

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.coef_covariance.diagonal(), 0.0))


def _gram_cholesky(gram: np.ndarray) -> np.ndarray:
    """Cholesky of W'W with a rank check reporting the offending column."""
    q = gram.shape[0]
    floor = RANK_RTOL * float(gram.diagonal().max())
    lower = np.zeros((q, q))
    for j in range(q):
        pivot = gram[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= floor:
            raise RankDeficient(j)
        lower[j, j] = math.sqrt(pivot)
        if j + 1 < q:
            lower[j + 1:, j] = (gram[j + 1:, j] - lower[j + 1:, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def ols_fit(design, response) -> FittedLinearModel:
    """Least squares of ``response`` on the columns of ``design``.

    Requires more rows than predictors and a full-rank design; the residual
    variance uses the n - q denominator.
    """
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    if design.ndim != 2:
        design = design.reshape(len(design), -1)
    n, q = design.shape
    if response.shape != (n,):
        raise TooFewRows(f"response length {response.shape} does not match {n} design rows")
    if n <= q:
        raise TooFewRows(f"need more rows ({n}) than predictors ({q})")

    gram = design.T @ design
    gram = 0.5 * (gram + gram.T)
    lower = _gram_cholesky(gram)
    rhs = design.T @ response
    coef = _back_sub_transpose(lower, _forward_sub(lower, rhs))

    residuals = response - design @ coef
    rss = float(residuals @ residuals)
    sigma2 = rss / (n - q)

    identity = np.eye(q)
    inv_cols = [_back_sub_transpose(lower, _forward_sub(lower, identity[:, k])) for k in range(q)]
    gram_inverse = np.column_stack(inv_cols)
    gram_inverse = 0.5 * (gram_inverse + gram_inverse.T)

    return FittedLinearModel(
        coefficients=coef,
        residual_variance=sigma2,
        coef_covariance=sigma2 * gram_inverse,
        df_residual=n - q,
        gram_inverse=gram_inverse,
    )


def predict(model: FittedLinearModel, design) -> np.ndarray:
    return np.asarray(design, dtype=float) @ model.coefficients


def wald_ci(model: FittedLinearModel, coef_index: int, level: float) -> tuple[float, float]:
    """Symmetric t interval ``estimate +/- t_{df,(1+level)/2} * SE``."""
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"confidence level must be inside (0, 1), got {level}")
    estimate = float(model.coefficients[coef_index])
    se = float(model.standard_errors[coef_index])
    half_width = t_quantile(model.df_residual, 0.5 * (1.0 + level)) * se
    return estimate - half_width, estimate + half_width
