"""Validation-sample selection for the second phase of a two-phase study.

Three strategies: simple random sampling, extreme tail sampling (ETS) on one
error-prone exposure, and ETS on the first principal component of all of
them. Every design consumes only fully observed quantities, which is what
keeps the downstream imputation analyses missing-at-random.

ETS conventions that the definitions leave open are fixed here: an odd budget
n takes floor(n/2) from the low tail and ceil(n/2) from the high tail, and
ties are broken by ascending original row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingDesignArtifact, NonFiniteValue, SizeExceedsPopulation
from .pca import PcaModel, pc_scores, pca_fit, pca_from_dict, pca_to_dict
from .randvar import RngStream

SRS = "srs"
ETS_VAR = "ets-var"
ETS_PC1 = "ets-pc1"
DESIGN_KINDS = (SRS, ETS_VAR, ETS_PC1)


@dataclass(frozen=True)
class DesignSpec:
    """One design choice plus the artifacts needed to impute under it.

    ``target_variable`` is the 1-based exposure index ordered on (ETS on a
    single variable only); ``pca_model`` and ``pc1_scores`` are populated only
    for the principal-component design.
    """

    kind: str
    n_validate: int
    target_variable: int | None = None
    pca_model: PcaModel | None = None
    pc1_scores: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.kind == ETS_VAR and self.target_variable is None:
            raise MissingDesignArtifact("ets-var design requires a target variable index")


@dataclass(frozen=True)
class ValidationSelection:
    """0/1 validation indicator over the study rows plus the sorted index list."""

    indicator: np.ndarray
    selected_indices: np.ndarray

    @property
    def n_selected(self) -> int:
        return int(self.indicator.sum())


def _selection_from_indices(indices: np.ndarray, n_total: int) -> ValidationSelection:
    indicator = np.zeros(n_total, dtype=np.int8)
    indicator[indices] = 1
    return ValidationSelection(indicator=indicator, selected_indices=np.sort(indices))


def _check_budget(n_validate: int, n_total: int) -> None:
    if not 0 < n_validate <= n_total:
        raise SizeExceedsPopulation(
            f"validation size {n_validate} must be in 1..{n_total}"
        )


def design_srs(rng: RngStream, n_total: int, n_validate: int) -> ValidationSelection:
    """Uniform without-replacement sample of ``n_validate`` of ``n_total`` rows."""
    _check_budget(n_validate, n_total)
    perm = np.arange(n_total)
    draws = rng.uniforms(n_validate)
    for i in range(n_validate):
        j = i + int(draws[i] * (n_total - i))
        perm[i], perm[j] = perm[j], perm[i]
    return _selection_from_indices(perm[:n_validate], n_total)


def design_ets(values, n_validate: int) -> ValidationSelection:
    """Rows holding the floor(n/2) smallest and ceil(n/2) largest values."""
    values = np.asarray(values, dtype=float)
    if not np.isfinite(values).all():
        raise NonFiniteValue("extreme tail sampling requires finite values")
    n_total = values.shape[0]
    _check_budget(n_validate, n_total)
    order = np.argsort(values, kind="stable")
    n_low = n_validate // 2
    n_high = n_validate - n_low
    selected = np.concatenate([order[:n_low], order[n_total - n_high:]])
    return _selection_from_indices(selected, n_total)


def design_ets_pc1(xstar, n_validate: int) -> tuple[ValidationSelection, DesignSpec]:
    """ETS on the first principal component of all error-prone exposures.

    The PCA is refit on the full phase-one exposure matrix at every call; the
    returned spec carries the fitted model and the scores because the
    imputation models downstream must include the same component.
    """
    model = pca_fit(xstar)
    scores = pc_scores(model, xstar, 1)
    selection = design_ets(scores, n_validate)
    spec = DesignSpec(
        kind=ETS_PC1,
        n_validate=n_validate,
        pca_model=model,
        pc1_scores=scores,
    )
    return selection, spec


def select_validation(
    rng: RngStream | None,
    xstar,
    kind: str,
    n_validate: int,
    target_variable: int | None = None,
) -> tuple[ValidationSelection, DesignSpec]:
    """Dispatch one design over the phase-one exposure matrix.

    ``rng`` is consumed only by simple random sampling; the ETS designs are
    deterministic functions of their inputs.
    """
    xstar = np.asarray(xstar, dtype=float)
    n_total = xstar.shape[0]
    if kind == SRS:
        if rng is None:
            raise MissingDesignArtifact("simple random sampling requires an rng stream")
        selection = design_srs(rng, n_total, n_validate)
        return selection, DesignSpec(kind=SRS, n_validate=n_validate)
    if kind == ETS_VAR:
        if target_variable is None:
            raise MissingDesignArtifact("ets-var design requires a target variable index")
        if not 1 <= target_variable <= xstar.shape[1]:
            raise MissingDesignArtifact(
                f"target variable {target_variable} outside 1..{xstar.shape[1]}"
            )
        selection = design_ets(xstar[:, target_variable - 1], n_validate)
        return selection, DesignSpec(
            kind=ETS_VAR, n_validate=n_validate, target_variable=target_variable
        )
    if kind == ETS_PC1:
        return design_ets_pc1(xstar, n_validate)
    raise ValueError(f"unknown design kind {kind!r}")


def design_spec_to_dict(spec: DesignSpec) -> dict:
    payload: dict = {"kind": spec.kind, "n_validate": spec.n_validate}
    if spec.target_variable is not None:
        payload["target_variable"] = spec.target_variable
    if spec.pca_model is not None:
        payload["pca"] = pca_to_dict(spec.pca_model)
    if spec.pc1_scores is not None:
        payload["pc1_scores"] = spec.pc1_scores.tolist()
    return payload


def design_spec_from_dict(payload: dict) -> DesignSpec:
    scores = payload.get("pc1_scores")
    pca = payload.get("pca")
    return DesignSpec(
        kind=payload["kind"],
        n_validate=int(payload["n_validate"]),
        target_variable=payload.get("target_variable"),
        pca_model=pca_from_dict(pca) if pca is not None else None,
        pc1_scores=np.asarray(scores, dtype=float) if scores is not None else None,
    )
