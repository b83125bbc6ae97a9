"""Monte Carlo harness comparing validation designs by empirical efficiency.

Generates repeated studies (five exposures, a binary confounder, additive
exposure error), applies each requested design, analyzes every model with
single imputation, and summarizes the slope estimates per (design, model)
cell: bias against the generating truth and efficiency as the inverse of the
across-replicate variance. Replicate r draws all its randomness from streams
keyed by r, so thread count never changes the results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .designs import DESIGN_KINDS, ETS_PC1, ETS_VAR, SRS, select_validation
from .errors import (
    EmptyCell,
    InvalidParameter,
    ReplicateFailureRate,
)
from .imputation import analyze_single_imputation
from .randvar import RngStream, bernoulli_sample, mvn_sample, substream
from .table import StudyTable

COV_INDEPENDENCE = "independence"
COV_EQUAL = "equal_dependence"
COV_UNEQUAL = "unequal_dependence"
COV_CUSTOM = "custom"
COV_STRUCTURES = (COV_INDEPENDENCE, COV_EQUAL, COV_UNEQUAL, COV_CUSTOM)

SEPARATE = "separate"
SHARED = "shared"

# shared-outcome presets: which exposures carry signal
SHARED_SCENARIOS = {
    "i": (1.0, 0.0, 0.0, 0.0, 0.0),
    "ii": (0.0, 1.0, 0.0, 0.0, 0.0),
    "iii": (0.2, 0.2, 0.2, 0.2, 0.2),
}

_UNEQUAL_SIGMA_X = np.array(
    [
        [1.00, 0.05, 0.10, 0.20, 0.35],
        [0.05, 1.00, 0.15, 0.25, 0.40],
        [0.10, 0.15, 1.00, 0.30, 0.45],
        [0.20, 0.25, 0.30, 1.00, 0.50],
        [0.35, 0.40, 0.45, 0.50, 1.00],
    ]
)

MAX_FAILURE_FRACTION = 0.01


def make_sigma_x(structure: str, p: int = 5, custom=None) -> np.ndarray:
    """Exposure covariance for a named structure (or a user-supplied matrix)."""
    if structure == COV_INDEPENDENCE:
        return np.eye(p)
    if structure == COV_EQUAL:
        sigma = np.full((p, p), 0.5)
        np.fill_diagonal(sigma, 1.0)
        return sigma
    if structure == COV_UNEQUAL:
        if p != 5:
            raise InvalidParameter("the unequal dependence structure is defined for 5 exposures")
        return _UNEQUAL_SIGMA_X.copy()
    if structure == COV_CUSTOM:
        if custom is None:
            raise InvalidParameter("custom covariance structure requires a matrix")
        sigma = np.asarray(custom, dtype=float)
        if sigma.shape != (p, p):
            raise InvalidParameter(f"custom covariance must be {p}x{p}, got {sigma.shape}")
        return sigma
    raise InvalidParameter(f"unknown covariance structure {structure!r}")


@dataclass(frozen=True)
class SimConfig:
    """One simulation setting; ``replicates`` independent studies are drawn from it."""

    n_validate: int
    sigma_u: float
    seed: int
    n_total: int = 1000
    p_exposures: int = 5
    z_prob: float = 0.3
    cov_structure: str = COV_EQUAL
    custom_sigma_x: tuple | None = None
    outcome_mode: str = SEPARATE
    shared_betas: tuple | None = None
    replicates: int = 1000
    designs: tuple = (SRS, ETS_VAR, ETS_PC1)
    ets_target: int = 1

    def __post_init__(self):
        if not 0 < self.n_validate < self.n_total:
            raise InvalidParameter(
                f"n_validate must be in 1..{self.n_total - 1}, got {self.n_validate}"
            )
        if self.sigma_u <= 0:
            raise InvalidParameter(f"sigma_u must be positive, got {self.sigma_u}")
        if not 0 <= self.z_prob <= 1:
            raise InvalidParameter(f"z_prob must be a probability, got {self.z_prob}")
        if self.cov_structure not in COV_STRUCTURES:
            raise InvalidParameter(f"unknown covariance structure {self.cov_structure!r}")
        if self.outcome_mode not in (SEPARATE, SHARED):
            raise InvalidParameter(f"outcome_mode must be separate or shared, got {self.outcome_mode!r}")
        if self.outcome_mode == SHARED:
            if self.shared_betas is None or len(self.shared_betas) != self.p_exposures:
                raise InvalidParameter("shared outcome mode requires shared_betas, one per exposure")
        elif self.shared_betas is not None:
            raise InvalidParameter("shared_betas only applies to the shared outcome mode")
        for kind in self.designs:
            if kind not in DESIGN_KINDS:
                raise InvalidParameter(f"unknown design kind {kind!r}")
        if self.replicates < 1:
            raise InvalidParameter("need at least one replicate")

    def sigma_x(self) -> np.ndarray:
        return make_sigma_x(self.cov_structure, self.p_exposures, self.custom_sigma_x)


def separate_outcome_coefficients(p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Intercepts j-1, slopes 0.5j, confounder effects 0.1j for models 1..p."""
    j = np.arange(1, p + 1, dtype=float)
    return j - 1.0, 0.5 * j, 0.1 * j


def gen_separate_outcomes(rng: RngStream, config: SimConfig) -> StudyTable:
    """Study draw where each exposure has its own outcome."""
    n, p = config.n_total, config.p_exposures
    z = bernoulli_sample(rng, config.z_prob, n).astype(float).reshape(n, 1)
    x = mvn_sample(rng, np.zeros(p), config.sigma_x(), n)
    intercepts, slopes, z_effects = separate_outcome_coefficients(p)
    eps = rng.normals(n * p).reshape(n, p)
    y = intercepts + slopes * x + z_effects * z + eps
    xstar = x + config.sigma_u * rng.normals(n * p).reshape(n, p)
    return StudyTable(y=y, x=x, z=z, r=np.zeros(n, dtype=np.int8), xstar=xstar)


def gen_shared_outcome(rng: RngStream, config: SimConfig) -> StudyTable:
    """Study draw where every exposure contributes to a single outcome."""
    n, p = config.n_total, config.p_exposures
    betas = np.asarray(config.shared_betas, dtype=float)
    z = bernoulli_sample(rng, config.z_prob, n).astype(float).reshape(n, 1)
    x = mvn_sample(rng, np.zeros(p), config.sigma_x(), n)
    y = (x @ betas + 0.1 * z[:, 0] + rng.normals(n)).reshape(n, 1)
    xstar = x + config.sigma_u * rng.normals(n * p).reshape(n, p)
    return StudyTable(y=y, x=x, z=z, r=np.zeros(n, dtype=np.int8), xstar=xstar)


def generate_table(rng: RngStream, config: SimConfig) -> StudyTable:
    if config.outcome_mode == SHARED:
        return gen_shared_outcome(rng, config)
    return gen_separate_outcomes(rng, config)


def true_slopes(config: SimConfig) -> np.ndarray:
    """Per-model estimand for the slope on the exposure.

    Separate outcomes: the generating slope. Shared outcome: the marginal
    model of Y on (X_j, Z) is deliberately smaller than the generator, so the
    target is the population projection slope (Sigma_X beta)_j / Var(X_j);
    Z is independent of X and drops out.
    """
    if config.outcome_mode == SEPARATE:
        return separate_outcome_coefficients(config.p_exposures)[1]
    sigma = config.sigma_x()
    betas = np.asarray(config.shared_betas, dtype=float)
    return (sigma @ betas) / sigma.diagonal()


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    design: str
    model: int
    estimate: float


@dataclass(frozen=True)
class SimulationResult:
    config: SimConfig
    rows: list[ReplicateResult]
    failures: list[tuple] = field(default_factory=list)


def _run_one_replicate(config: SimConfig, replicate: int):
    rows = []
    failures = []
    data_rng = substream(config.seed, "data", replicate)
    table = generate_table(data_rng, config)
    for kind in config.designs:
        rng = substream(config.seed, "design", kind, replicate) if kind == SRS else None
        try:
            selection, spec = select_validation(
                rng, table.xstar, kind, config.n_validate, config.ets_target
            )
            masked = table.with_validation(selection)
        except Exception as err:  # noqa: BLE001 - recorded, not swallowed
            failures.extend(
                (replicate, kind, j, str(err)) for j in range(1, config.p_exposures + 1)
            )
            continue
        for j in range(1, config.p_exposures + 1):
            try:
                model = analyze_single_imputation(masked, spec, j)
                estimate = float(model.coefficients[1])
                if not math.isfinite(estimate):
                    raise InvalidParameter("non-finite slope estimate")
                rows.append(ReplicateResult(replicate, kind, j, estimate))
            except Exception as err:  # noqa: BLE001
                failures.append((replicate, kind, j, str(err)))
    return rows, failures


def _worker(args):
    return _run_one_replicate(*args)


def run_replicates(config: SimConfig, threads: int = 1) -> SimulationResult:
    """Run every replicate of ``config``; identical output at any thread count.

    Per-replicate failures are recorded and excluded from summaries; the run
    aborts if more than 1% of replicates hit one.
    """
    tasks = [(config, r) for r in range(config.replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunk = max(1, config.replicates // (threads * 8))
            outcomes = list(pool.map(_worker, tasks, chunksize=chunk))
    else:
        outcomes = [_run_one_replicate(*task) for task in tasks]

    rows: list[ReplicateResult] = []
    failures: list[tuple] = []
    for chunk_rows, chunk_failures in outcomes:
        rows.extend(chunk_rows)
        failures.extend(chunk_failures)

    design_order = {kind: i for i, kind in enumerate(config.designs)}
    rows.sort(key=lambda row: (row.replicate, design_order[row.design], row.model))

    failed_replicates = {f[0] for f in failures}
    if len(failed_replicates) > MAX_FAILURE_FRACTION * config.replicates:
        raise ReplicateFailureRate(
            f"{len(failed_replicates)} of {config.replicates} replicates failed; "
            f"first failure: {failures[0]}"
        )
    return SimulationResult(config=config, rows=rows, failures=failures)


@dataclass(frozen=True)
class EfficiencyCell:
    """Across-replicate summary for one (design, model) pair."""

    design: str
    model: int
    n_replicates: int
    mean_estimate: float
    truth: float
    bias: float
    variance: float
    efficiency: float          # math.inf when the variance is exactly zero
    mc_se: float               # Monte Carlo SE of the mean estimate
    efficiency_ci: tuple[float, float]


def summarize_efficiency(result: SimulationResult, truths=None) -> list[EfficiencyCell]:
    """Bias/variance/efficiency per (design, model), in config design order."""
    config = result.config
    if truths is None:
        truths = true_slopes(config)
    truths = np.asarray(truths, dtype=float)
    cells = []
    for kind in config.designs:
        for j in range(1, config.p_exposures + 1):
            estimates = np.array(
                [row.estimate for row in result.rows if row.design == kind and row.model == j]
            )
            count = estimates.shape[0]
            if count < 2:
                raise EmptyCell(f"design {kind}, model {j} has {count} usable replicates")
            variance = float(estimates.var(ddof=1))
            if variance == 0.0:
                efficiency = math.inf
                eff_ci = (math.inf, math.inf)
            else:
                efficiency = 1.0 / variance
                half = 1.959963984540054 * variance * math.sqrt(2.0 / (count - 1))
                var_low = max(variance - half, 1e-300)
                eff_ci = (1.0 / (variance + half), 1.0 / var_low)
            mean_estimate = float(estimates.mean())
            cells.append(
                EfficiencyCell(
                    design=kind,
                    model=j,
                    n_replicates=count,
                    mean_estimate=mean_estimate,
                    truth=float(truths[j - 1]),
                    bias=mean_estimate - float(truths[j - 1]),
                    variance=variance,
                    efficiency=efficiency,
                    mc_se=math.sqrt(variance / count),
                    efficiency_ci=eff_ci,
                )
            )
    return cells
