"""Dense symmetric linear algebra kernels.

Everything here is deterministic, pure, and sized for the small matrices that
occur in this package (correlation matrices of a handful of exposures, Gram
matrices of narrow regression designs). Tolerances are fixed constants so that
repeated runs make identical accept/reject decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantColumn,
    ConvergenceFailure,
    DimensionMismatch,
    NonFiniteValue,
    NotPositiveDefinite,
    NotSymmetric,
    TooFewRows,
)

SYMMETRY_RTOL = 1e-10
PIVOT_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100
JACOBI_OFFDIAG_RTOL = 1e-12


@dataclass(frozen=True)
class SymEigen:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` are sorted descending; column k of ``eigenvectors`` is the
    unit eigenvector paired with ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_square(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NotSymmetric(f"{name} requires a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFiniteValue(f"{name} requires finite entries")
    return a


def _check_symmetric(a: np.ndarray, name: str) -> None:
    scale = np.abs(a).max()
    asym = np.abs(a - a.T).max()
    if asym > SYMMETRY_RTOL * max(scale, 1e-300):
        raise NotSymmetric(
            f"{name}: matrix asymmetry {asym:.3e} exceeds {SYMMETRY_RTOL:.0e} relative"
        )


def cholesky(a) -> np.ndarray:
    """Lower-triangular L with ``L @ L.T == a`` for symmetric positive-definite a.

    Raises ``NotPositiveDefinite`` as soon as a pivot falls at or below
    ``1e-12 * max(diag(a))``, and ``NotSymmetric`` for asymmetry beyond
    ``1e-10`` relative.
    """
    a = _as_square(a, "cholesky")
    _check_symmetric(a, "cholesky")
    n = a.shape[0]
    pivot_floor = PIVOT_RTOL * max(float(a.diagonal().max()), 0.0)
    lower = np.zeros((n, n))
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= pivot_floor:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at index {j} is not positive", pivot_index=j
            )
        lower[j, j] = math.sqrt(pivot)
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def _forward_sub(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L y = b for lower-triangular L."""
    n = lower.shape[0]
    y = np.zeros(n)
    for i in range(n):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    return y


def _back_sub_transpose(lower: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve L.T x = y for lower-triangular L."""
    n = lower.shape[0]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - lower[i + 1 :, i] @ x[i + 1 :]) / lower[i, i]
    return x


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive-definite a.

    ``b`` may be a vector or a matrix of stacked right-hand-side columns.
    """
    lower = cholesky(a)
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        return _back_sub_transpose(lower, _forward_sub(lower, b))
    cols = [_back_sub_transpose(lower, _forward_sub(lower, b[:, k])) for k in range(b.shape[1])]
    return np.column_stack(cols)


def sym_eigen(a) -> SymEigen:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Converges when the off-diagonal Frobenius norm drops below ``1e-12``
    relative to the matrix norm; raises ``ConvergenceFailure`` after 100
    sweeps (never observed for the small dense matrices this package builds).
    """
    a = _as_square(a, "sym_eigen")
    _check_symmetric(a, "sym_eigen")
    n = a.shape[0]
    work = 0.5 * (a + a.T)
    vectors = np.eye(n)
    norm = np.linalg.norm(work)
    tol = JACOBI_OFFDIAG_RTOL * max(norm, 1e-300)

    def off_norm(m):
        off = m.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.linalg.norm(off))

    converged = n == 1 or off_norm(work) <= tol
    for _ in range(JACOBI_MAX_SWEEPS):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= tol / (n * n):
                    continue
                tau = (work[q, q] - work[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # two-sided rotation: work <- G.T @ work @ G on columns/rows p, q
                col_p, col_q = work[:, p].copy(), work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                row_p, row_q = work[p, :].copy(), work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                work[p, q] = 0.0
                work[q, p] = 0.0
                vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
                vectors[:, p] = c * vec_p - s * vec_q
                vectors[:, q] = s * vec_p + c * vec_q
        converged = off_norm(work) <= tol
    if not converged:
        raise ConvergenceFailure(
            f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )
    values = work.diagonal().copy()
    order = np.argsort(-values, kind="stable")
    return SymEigen(eigenvalues=values[order], eigenvectors=vectors[:, order])


def standardize_columns(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale each column to mean 0, sample SD 1 (denominator n-1).

    Returns ``(standardized, means, sds)``. Raises ``ConstantColumn`` naming
    the first column whose sample SD is exactly zero.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if m.shape[0] < 2:
        raise TooFewRows("standardize_columns requires at least 2 rows")
    if not np.isfinite(m).all():
        raise NonFiniteValue("standardize_columns requires finite entries")
    means = m.mean(axis=0)
    sds = m.std(axis=0, ddof=1)
    zero = np.flatnonzero(sds == 0.0)
    if zero.size:
        raise ConstantColumn(int(zero[0]))
    return (m - means) / sds, means, sds
