"""Column-oriented study dataset shared by the simulation and study pipelines.

Holds outcomes, error-prone exposures, error-free exposures (NaN where not
yet validated), confounders, and the validation indicator. One analysis model
per exposure; with a shared outcome the single outcome column serves every
model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .designs import ValidationSelection
from .errors import DimensionMismatch, MissingPredictor


def _names(prefix: str, count: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(count))


@dataclass(frozen=True)
class StudyTable:
    y: np.ndarray                     # N x P outcomes (or N x 1 shared)
    x: np.ndarray                     # N x P error-free exposures, NaN unobserved
    z: np.ndarray                     # N x K confounders
    r: np.ndarray                     # N validation indicator
    xstar: np.ndarray | None = None   # N x P error-prone exposures
    outcome_names: tuple[str, ...] = ()
    exposure_names: tuple[str, ...] = ()
    errorprone_names: tuple[str, ...] = ()
    confounder_names: tuple[str, ...] = ()

    def __post_init__(self):
        n = self.x.shape[0]
        for name, arr in (("y", self.y), ("z", self.z)):
            if arr.ndim != 2 or arr.shape[0] != n:
                raise DimensionMismatch(f"{name} must be 2-D with {n} rows")
        if self.r.shape != (n,):
            raise DimensionMismatch(f"validation indicator must have length {n}")
        if self.xstar is not None and self.xstar.shape != self.x.shape:
            raise DimensionMismatch("error-prone exposures must match exposures in shape")
        if not self.outcome_names:
            object.__setattr__(self, "outcome_names", _names("y", self.y.shape[1]))
        if not self.exposure_names:
            object.__setattr__(self, "exposure_names", _names("x", self.x.shape[1]))
        if not self.errorprone_names:
            object.__setattr__(
                self, "errorprone_names", tuple(f"{n}_star" for n in self.exposure_names)
            )
        if not self.confounder_names:
            object.__setattr__(self, "confounder_names", _names("z", self.z.shape[1]))

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_models(self) -> int:
        return self.x.shape[1]

    @property
    def shared_outcome(self) -> bool:
        return self.y.shape[1] == 1 and self.x.shape[1] > 1

    def outcome_for_model(self, j: int) -> np.ndarray:
        """Outcome column of model ``j`` (1-based); the shared column if there is one."""
        if not 1 <= j <= self.n_models:
            raise DimensionMismatch(f"model index {j} outside 1..{self.n_models}")
        column = 0 if self.y.shape[1] == 1 else j - 1
        return self.y[:, column]

    def with_validation(self, selection: ValidationSelection) -> "StudyTable":
        """Mark the selected rows validated and blank the exposures elsewhere."""
        if selection.indicator.shape[0] != self.n_rows:
            raise DimensionMismatch("selection length does not match table rows")
        if not np.isfinite(self.x).all():
            raise MissingPredictor("cannot re-select validation rows on a masked table")
        masked = np.where(selection.indicator[:, None] == 1, self.x, np.nan)
        return replace(self, x=masked, r=selection.indicator.astype(np.int8))

    def validated_rows(self) -> np.ndarray:
        return self.r == 1
