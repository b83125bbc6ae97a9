"""Generator for the bundled synthetic study dataset.

The package does not redistribute any survey extract. Instead it ships a
seed-generated stand-in with the same shape a real dietary study would have:
2388 rows, five exposure columns whose correlation profile matches the
published one (0.59 / 0.38 / 0.34 for the correlated trio, everything else at
or below 0.16), scales in the hundreds-to-tens range so that error variances
of one quarter the exposure variance are meaningfully large, five outcome
markers with near-zero exposure effects, and four pre-encoded numeric
confounders. Regenerating with the same seed reproduces the CSV byte for
byte.
"""

from __future__ import annotations

import csv
from importlib import resources

import numpy as np

from .randvar import substream
from .study_pipeline import StudySchema

SURROGATE_SEED = 20260808
SURROGATE_ROWS = 2388

EXPOSURE_NAMES = ("intake_a", "intake_b", "intake_c", "intake_d", "intake_e")
OUTCOME_NAMES = ("marker_a", "marker_b", "marker_c", "marker_d", "marker_e")
CONFOUNDER_NAMES = ("sex", "age", "group", "education")
ID_COLUMN = "pid"

EXPOSURE_CORR = np.array(
    [
        [1.00, 0.10, 0.59, 0.05, 0.38],
        [0.10, 1.00, 0.12, 0.16, 0.08],
        [0.59, 0.12, 1.00, 0.06, 0.34],
        [0.05, 0.16, 0.06, 1.00, 0.04],
        [0.38, 0.08, 0.34, 0.04, 1.00],
    ]
)
EXPOSURE_MEANS = np.array([920.0, 165.0, 27.0, 9.0, 230.0])
EXPOSURE_SDS = np.array([557.9, 174.7, 16.8, 21.8, 141.3])

OUTCOME_MEANS = np.array([62.0, 72.0, 53.0, 13.0, 12.0])
OUTCOME_SDS = np.array([20.0, 11.0, 14.0, 9.0, 5.0])
# standardized exposure effects kept near zero, as in the study this mimics
OUTCOME_EFFECTS = np.array([0.05, -0.04, 0.06, -0.03, 0.05])


def surrogate_schema() -> StudySchema:
    return StudySchema(
        outcome_columns=OUTCOME_NAMES,
        exposure_columns=EXPOSURE_NAMES,
        confounder_columns=CONFOUNDER_NAMES,
        id_column=ID_COLUMN,
    )


def generate_surrogate(seed: int = SURROGATE_SEED, n_rows: int = SURROGATE_ROWS):
    """Arrays for the bundled dataset: (ids, outcomes, exposures, confounders)."""
    rng = substream(seed, "surrogate")
    cov = EXPOSURE_CORR * np.outer(EXPOSURE_SDS, EXPOSURE_SDS)
    from .randvar import mvn_sample

    exposures = EXPOSURE_MEANS + mvn_sample(rng, np.zeros(5), cov, n_rows)

    sex = (rng.uniforms(n_rows) < 0.52).astype(float)
    age = np.clip(np.round(47.0 + 18.0 * rng.normals(n_rows)), 18, 85)
    group = np.floor(rng.uniforms(n_rows) * 4.0)
    education = np.floor(rng.uniforms(n_rows) * 5.0)
    confounders = np.column_stack([sex, age, group, education])

    standardized = (exposures - EXPOSURE_MEANS) / EXPOSURE_SDS
    noise = rng.normals(n_rows * 5).reshape(n_rows, 5)
    outcomes = (
        OUTCOME_MEANS
        + OUTCOME_EFFECTS * OUTCOME_SDS * standardized
        + np.outer(sex, 0.15 * OUTCOME_SDS)
        + np.outer((age - 47.0) / 18.0, 0.1 * OUTCOME_SDS)
        + noise * OUTCOME_SDS * 0.97
    )

    ids = np.arange(1001, 1001 + n_rows)
    return ids, outcomes, exposures, confounders


def write_surrogate_csv(path, seed: int = SURROGATE_SEED, n_rows: int = SURROGATE_ROWS) -> None:
    ids, outcomes, exposures, confounders = generate_surrogate(seed, n_rows)
    header = [ID_COLUMN, *OUTCOME_NAMES, *EXPOSURE_NAMES, *CONFOUNDER_NAMES]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(len(ids)):
            row = [str(int(ids[i]))]
            row += [repr(float(v)) for v in outcomes[i]]
            row += [repr(float(v)) for v in exposures[i]]
            row += [repr(float(v)) for v in confounders[i]]
            writer.writerow(row)


def bundled_surrogate_path():
    """Path to the packaged surrogate CSV."""
    return resources.files("valdesign.data").joinpath("surrogate_intake.csv")


def bundled_schema_path():
    return resources.files("valdesign.data").joinpath("surrogate_intake.schema.json")


if __name__ == "__main__":
    import json
    import sys

    from .study_pipeline import schema_to_dict

    out_csv = sys.argv[1] if len(sys.argv) > 1 else "surrogate_intake.csv"
    out_schema = sys.argv[2] if len(sys.argv) > 2 else "surrogate_intake.schema.json"
    write_surrogate_csv(out_csv)
    with open(out_schema, "w", encoding="utf-8") as handle:
        json.dump(schema_to_dict(surrogate_schema()), handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"wrote {out_csv} and {out_schema}")
