"""Principal component analysis of the error-prone exposure matrix.

Fitting always goes through the sample correlation matrix (centered and
scaled columns), never the raw covariance, so exposures measured on wildly
different scales contribute comparably. Loading signs follow a fixed
convention -- the largest-magnitude entry of each loading column is positive
-- because eigenvector signs are otherwise arbitrary and reports must be
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooFewRows
from .numerics import standardize_columns, sym_eigen


@dataclass(frozen=True)
class PcaModel:
    center: np.ndarray
    scale: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    proportion_explained: np.ndarray

    @property
    def n_variables(self) -> int:
        return self.center.shape[0]


def pca_fit(xstar) -> PcaModel:
    """Fit a PCA to the columns of ``xstar`` via its sample correlation matrix."""
    xstar = np.asarray(xstar, dtype=float)
    if xstar.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {xstar.shape}")
    n, p = xstar.shape
    if n < p + 1:
        raise TooFewRows(f"PCA needs at least {p + 1} rows for {p} variables, got {n}")
    standardized, center, scale = standardize_columns(xstar)
    corr = standardized.T @ standardized / (n - 1)
    corr = 0.5 * (corr + corr.T)
    eig = sym_eigen(corr)
    values = np.maximum(eig.eigenvalues, 0.0)
    loadings = eig.eigenvectors.copy()
    for k in range(p):
        dominant = int(np.argmax(np.abs(loadings[:, k])))
        if loadings[dominant, k] < 0.0:
            loadings[:, k] = -loadings[:, k]
    return PcaModel(
        center=center,
        scale=scale,
        loadings=loadings,
        eigenvalues=values,
        proportion_explained=values / values.sum(),
    )


def pc_scores(model: PcaModel, xstar, component: int) -> np.ndarray:
    """Scores of ``xstar`` on the given component (1-based, so PC1 is 1)."""
    xstar = np.asarray(xstar, dtype=float)
    if xstar.ndim != 2 or xstar.shape[1] != model.n_variables:
        raise DimensionMismatch(
            f"expected {model.n_variables} columns, got shape {xstar.shape}"
        )
    if not 1 <= component <= model.n_variables:
        raise DimensionMismatch(
            f"component must be in 1..{model.n_variables}, got {component}"
        )
    z = (xstar - model.center) / model.scale
    return z @ model.loadings[:, component - 1]


def pca_to_dict(model: PcaModel) -> dict:
    """JSON-ready summary of a fitted PCA."""
    return {
        "center": model.center.tolist(),
        "scale": model.scale.tolist(),
        "loadings": model.loadings.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "proportion_explained": model.proportion_explained.tolist(),
    }


def pca_from_dict(payload: dict) -> PcaModel:
    return PcaModel(
        center=np.asarray(payload["center"], dtype=float),
        scale=np.asarray(payload["scale"], dtype=float),
        loadings=np.asarray(payload["loadings"], dtype=float),
        eigenvalues=np.asarray(payload["eigenvalues"], dtype=float),
        proportion_explained=np.asarray(payload["proportion_explained"], dtype=float),
    )
