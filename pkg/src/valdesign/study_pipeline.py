"""Semi-synthetic study workflow on a user-supplied dataset.

Ingest a CSV of outcomes, error-free exposures, and pre-encoded numeric
confounders; inject seeded additive error into the exposures; run every
design at a fixed validation budget; analyze by multiple imputation; and
report gold-standard versus partial-validation estimates and interval widths
per design and model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .designs import ETS_PC1, ETS_VAR, SRS, select_validation
from .errors import ConfigError, InvalidRule, MissingColumn, NonNumericCell
from .imputation import analyze_multiple_imputation
from .linear_model import ols_fit, wald_ci
from .pca import PcaModel
from .randvar import RngStream
from .table import StudyTable

COMPARISON_DESIGNS = (SRS, ETS_VAR, ETS_PC1)


@dataclass(frozen=True)
class StudySchema:
    """Column roles for a study CSV; outcomes pair with exposures by position."""

    outcome_columns: tuple[str, ...]
    exposure_columns: tuple[str, ...]
    confounder_columns: tuple[str, ...]
    id_column: str | None = None
    errorprone_columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.outcome_columns) != len(self.exposure_columns):
            raise ConfigError(
                "schema must pair each outcome with exactly one exposure "
                f"({len(self.outcome_columns)} outcomes, {len(self.exposure_columns)} exposures)"
            )
        if not self.outcome_columns:
            raise ConfigError("schema names no outcome columns")
        if self.errorprone_columns is not None and len(self.errorprone_columns) != len(
            self.exposure_columns
        ):
            raise ConfigError("schema must pair each exposure with one error-prone column")

    @property
    def n_models(self) -> int:
        return len(self.outcome_columns)


_SCHEMA_KEYS = {
    "outcome_columns",
    "exposure_columns",
    "confounder_columns",
    "id_column",
    "errorprone_columns",
}


def schema_from_dict(payload: dict) -> StudySchema:
    unknown = set(payload) - _SCHEMA_KEYS
    if unknown:
        raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
    for key in ("outcome_columns", "exposure_columns", "confounder_columns"):
        if key not in payload:
            raise ConfigError(f"schema is missing required key {key!r}")
    errorprone = payload.get("errorprone_columns")
    return StudySchema(
        outcome_columns=tuple(payload["outcome_columns"]),
        exposure_columns=tuple(payload["exposure_columns"]),
        confounder_columns=tuple(payload["confounder_columns"]),
        id_column=payload.get("id_column"),
        errorprone_columns=tuple(errorprone) if errorprone is not None else None,
    )


def schema_to_dict(schema: StudySchema) -> dict:
    payload = {
        "outcome_columns": list(schema.outcome_columns),
        "exposure_columns": list(schema.exposure_columns),
        "confounder_columns": list(schema.confounder_columns),
    }
    if schema.id_column is not None:
        payload["id_column"] = schema.id_column
    if schema.errorprone_columns is not None:
        payload["errorprone_columns"] = list(schema.errorprone_columns)
    return payload


@dataclass(frozen=True)
class LoadedStudy:
    table: StudyTable
    rejected_rows: tuple[int, ...]    # 1-based data-row numbers dropped as incomplete
    row_ids: tuple[str, ...]


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: file has no header row") from None
        return header, list(reader)


def load_table(path, schema: StudySchema) -> LoadedStudy:
    """Read a complete-case study table: every schema cell present and numeric.

    Rows with an empty schema cell are rejected (their 1-based row numbers are
    reported on the result); any other unparsable cell raises
    ``NonNumericCell`` with its location.
    """
    header, raw_rows = _read_rows(path)
    positions = {name: i for i, name in enumerate(header)}
    needed = list(schema.outcome_columns + schema.exposure_columns + schema.confounder_columns)
    if schema.errorprone_columns is not None:
        needed += list(schema.errorprone_columns)
    missing = [name for name in needed if name not in positions]
    if schema.id_column is not None and schema.id_column not in positions:
        missing.append(schema.id_column)
    if missing:
        raise MissingColumn(f"{path}: missing columns {missing}")

    kept: list[list[float]] = []
    row_ids: list[str] = []
    rejected: list[int] = []
    for row_number, row in enumerate(raw_rows, start=1):
        cells = [row[positions[name]].strip() if positions[name] < len(row) else "" for name in needed]
        if any(cell == "" for cell in cells):
            rejected.append(row_number)
            continue
        values = []
        for name, cell in zip(needed, cells):
            try:
                values.append(float(cell))
            except ValueError:
                raise NonNumericCell(row_number, name, cell) from None
        kept.append(values)
        if schema.id_column is not None:
            row_ids.append(row[positions[schema.id_column]].strip())
        else:
            row_ids.append(str(row_number))

    data = np.asarray(kept, dtype=float).reshape(len(kept), len(needed))
    p = schema.n_models
    k = len(schema.confounder_columns)
    y = data[:, :p]
    x = data[:, p : 2 * p]
    z = data[:, 2 * p : 2 * p + k]
    xstar = data[:, 2 * p + k : 3 * p + k] if schema.errorprone_columns is not None else None
    table = StudyTable(
        y=y,
        x=x,
        z=z,
        r=np.zeros(len(kept), dtype=np.int8),
        xstar=xstar,
        outcome_names=schema.outcome_columns,
        exposure_names=schema.exposure_columns,
        errorprone_names=schema.errorprone_columns or (),
        confounder_names=schema.confounder_columns,
    )
    return LoadedStudy(table=table, rejected_rows=tuple(rejected), row_ids=tuple(row_ids))


def load_exposure_matrix(path, schema: StudySchema):
    """Strict read of the error-prone exposure columns only (design phase).

    Returns ``(matrix, row_ids)``. The file is not required to contain the
    error-free exposures; every error-prone cell must be present and numeric
    so that selected row numbers stay aligned with the file.
    """
    if schema.errorprone_columns is None:
        raise ConfigError("schema must name errorprone_columns for the design phase")
    header, raw_rows = _read_rows(path)
    positions = {name: i for i, name in enumerate(header)}
    missing = [name for name in schema.errorprone_columns if name not in positions]
    if schema.id_column is not None and schema.id_column not in positions:
        missing.append(schema.id_column)
    if missing:
        raise MissingColumn(f"{path}: missing columns {missing}")
    values = np.empty((len(raw_rows), len(schema.errorprone_columns)))
    row_ids = []
    for row_number, row in enumerate(raw_rows, start=1):
        for k, name in enumerate(schema.errorprone_columns):
            cell = row[positions[name]].strip() if positions[name] < len(row) else ""
            try:
                values[row_number - 1, k] = float(cell)
            except ValueError:
                raise NonNumericCell(row_number, name, cell) from None
        if schema.id_column is not None:
            row_ids.append(row[positions[schema.id_column]].strip())
        else:
            row_ids.append(str(row_number))
    return values, tuple(row_ids)


def load_partial_table(path, schema: StudySchema, r_column: str | None = None) -> StudyTable:
    """Read a partially validated table (analysis phase).

    Error-free exposure cells may be empty only where the row is unvalidated;
    they load as NaN. All other schema cells must be present and numeric.
    The validation indicator comes from ``r_column`` when given, otherwise it
    is left all-zero for a selection file to fill in.
    """
    if schema.errorprone_columns is None:
        raise ConfigError("schema must name errorprone_columns for the analysis phase")
    header, raw_rows = _read_rows(path)
    positions = {name: i for i, name in enumerate(header)}
    strict = list(schema.outcome_columns + schema.confounder_columns + schema.errorprone_columns)
    if r_column is not None:
        strict.append(r_column)
    missing = [name for name in strict + list(schema.exposure_columns) if name not in positions]
    if missing:
        raise MissingColumn(f"{path}: missing columns {missing}")

    def parse(row_number, row, name, allow_empty=False):
        index = positions[name]
        cell = row[index].strip() if index < len(row) else ""
        if cell == "":
            if allow_empty:
                return math.nan
            raise NonNumericCell(row_number, name, cell)
        try:
            return float(cell)
        except ValueError:
            raise NonNumericCell(row_number, name, cell) from None

    n = len(raw_rows)
    p = schema.n_models
    y = np.empty((n, p))
    x = np.empty((n, p))
    xstar = np.empty((n, p))
    z = np.empty((n, len(schema.confounder_columns)))
    r = np.zeros(n, dtype=np.int8)
    for i, row in enumerate(raw_rows):
        row_number = i + 1
        for j, name in enumerate(schema.outcome_columns):
            y[i, j] = parse(row_number, row, name)
        for j, name in enumerate(schema.exposure_columns):
            x[i, j] = parse(row_number, row, name, allow_empty=True)
        for j, name in enumerate(schema.errorprone_columns):
            xstar[i, j] = parse(row_number, row, name)
        for j, name in enumerate(schema.confounder_columns):
            z[i, j] = parse(row_number, row, name)
        if r_column is not None:
            r[i] = 1 if parse(row_number, row, r_column) != 0.0 else 0
    return StudyTable(
        y=y,
        x=x,
        z=z,
        r=r,
        xstar=xstar,
        outcome_names=schema.outcome_columns,
        exposure_names=schema.exposure_columns,
        errorprone_names=schema.errorprone_columns,
        confounder_names=schema.confounder_columns,
    )


def inject_error(
    rng: RngStream,
    table: StudyTable,
    var_fraction: float | None = None,
    variances=None,
) -> StudyTable:
    """Add independent normal error to each exposure column.

    Either ``var_fraction`` (error variance = fraction times the column's
    sample variance) or an explicit per-column ``variances`` vector, not both.
    """
    if (var_fraction is None) == (variances is None):
        raise InvalidRule("specify exactly one of var_fraction or explicit variances")
    p = table.n_models
    if var_fraction is not None:
        if var_fraction <= 0:
            raise InvalidRule(f"var_fraction must be positive, got {var_fraction}")
        sigma2 = var_fraction * table.x.var(axis=0, ddof=1)
    else:
        sigma2 = np.asarray(variances, dtype=float)
        if sigma2.shape != (p,):
            raise InvalidRule(f"need one error variance per exposure, got shape {sigma2.shape}")
        if (sigma2 <= 0).any():
            raise InvalidRule("explicit error variances must all be positive")
    noise = rng.normals(table.n_rows * p).reshape(table.n_rows, p) * np.sqrt(sigma2)
    return replace(
        table,
        xstar=table.x + noise,
        errorprone_names=tuple(f"{name}_star" for name in table.exposure_names),
    )


@dataclass(frozen=True)
class GoldResult:
    model: int
    estimate: float
    se: float
    ci: tuple[float, float]

    @property
    def ci_width(self) -> float:
        return self.ci[1] - self.ci[0]


@dataclass(frozen=True)
class DesignModelResult:
    design: str
    model: int
    estimate: float
    se: float
    ci: tuple[float, float]
    total_var: float
    df: float

    @property
    def ci_width(self) -> float:
        return self.ci[1] - self.ci[0]


@dataclass(frozen=True)
class ComparisonReport:
    gold: tuple[GoldResult, ...]
    results: tuple[DesignModelResult, ...]
    pca: PcaModel
    metadata: dict = field(default_factory=dict)

    def mean_ci_width(self, design: str) -> float:
        widths = [r.ci_width for r in self.results if r.design == design]
        return float(np.mean(widths))

    def result_for(self, design: str, model: int) -> DesignModelResult:
        for row in self.results:
            if row.design == design and row.model == model:
                return row
        raise KeyError((design, model))


def gold_standard_results(table: StudyTable, level: float) -> tuple[GoldResult, ...]:
    """Full-data OLS of each outcome on its error-free exposure and confounders."""
    rows = []
    for j in range(1, table.n_models + 1):
        design = np.column_stack([np.ones(table.n_rows), table.x[:, j - 1], table.z])
        fit = ols_fit(design, table.outcome_for_model(j))
        rows.append(
            GoldResult(
                model=j,
                estimate=float(fit.coefficients[1]),
                se=float(fit.standard_errors[1]),
                ci=wald_ci(fit, 1, level),
            )
        )
    return tuple(rows)


def run_design_comparison(
    rng: RngStream,
    table: StudyTable,
    n_validate: int,
    m_imputations: int,
    level: float = 0.95,
    ets_target: int = 1,
    metadata: dict | None = None,
) -> ComparisonReport:
    """Gold standard plus one multiple-imputation analysis per design and model."""
    if table.xstar is None:
        raise InvalidRule("inject or load error-prone exposures before running the comparison")
    gold = gold_standard_results(table, level)
    results = []
    pca_model = None
    for kind in COMPARISON_DESIGNS:
        design_rng = rng.substream("select", kind) if kind == SRS else None
        selection, spec = select_validation(
            design_rng, table.xstar, kind, n_validate, target_variable=ets_target
        )
        if kind == ETS_PC1:
            pca_model = spec.pca_model
        masked = table.with_validation(selection)
        for j in range(1, table.n_models + 1):
            pooled = analyze_multiple_imputation(
                rng.substream("mi", kind, j), masked, spec, j, m_imputations, level
            )
            slope = pooled[1]
            results.append(
                DesignModelResult(
                    design=kind,
                    model=j,
                    estimate=slope.estimate,
                    se=math.sqrt(slope.total_var),
                    ci=slope.ci,
                    total_var=slope.total_var,
                    df=slope.df,
                )
            )
    return ComparisonReport(
        gold=gold,
        results=tuple(results),
        pca=pca_model,
        metadata=dict(metadata or {}),
    )
