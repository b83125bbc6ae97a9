"""Two-phase validation study design and analysis.

Select which subjects to validate (simple random sampling or extreme tail
sampling on a single error-prone exposure or on the first principal component
of all of them), impute the unvalidated exposures with design-aware models,
and compare designs by Monte Carlo efficiency or confidence-interval width.
"""

__version__ = "0.1.0"
CONFIG_SCHEMA_VERSION = "1"
